"""Input-validation helpers shared by the functional API and the estimators.

The package-wide image convention is a float32 numpy array of shape
``(H, W, C)`` with ``C`` in {1, 3}, pixel values in the unit interval and
both sides at least 8.  Batches stack images on a leading axis.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

MIN_SIDE = 8
_RANGE_TOL = 1e-5


def check_image(arr, name: str = "image") -> np.ndarray:
    """Validate and canonicalise a single image to float32 ``(H, W, C)``.

    Accepts ``(H, W)`` (promoted to one channel) or ``(H, W, C)`` with C in
    {1, 3}.  Values must already live in [0, 1] up to a small tolerance;
    anything further out is a caller bug, not something to silently clip.
    """
    a = np.asarray(arr)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise DimensionError(
            f"{name}: expected (H, W) or (H, W, C) with C in {{1, 3}}, got shape {a.shape}"
        )
    if a.shape[0] < MIN_SIDE or a.shape[1] < MIN_SIDE:
        raise DimensionError(
            f"{name}: sides must be >= {MIN_SIDE}, got {a.shape[0]}x{a.shape[1]}"
        )
    a = a.astype(np.float32, copy=False)
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{name}: contains non-finite values")
    lo, hi = float(a.min()), float(a.max())
    if lo < -_RANGE_TOL or hi > 1.0 + _RANGE_TOL:
        raise DimensionError(
            f"{name}: pixel values must lie in [0, 1], got range [{lo:.4g}, {hi:.4g}]"
        )
    return np.clip(a, 0.0, 1.0)


def check_batch(X, name: str = "X") -> np.ndarray:
    """Validate a batch of images to float32 ``(N, H, W, C)``.

    Accepts a single image (promoted to a batch of one), an ``(N, H, W)``
    stack, or ``(N, H, W, C)``.
    """
    a = np.asarray(X)
    if a.ndim == 2 or (a.ndim == 3 and a.shape[-1] in (1, 3) and a.shape[0] >= MIN_SIDE):
        # A lone image; check_image sorts out the 2-D vs 3-D ambiguity.
        return check_image(a, name)[None]
    if a.ndim == 3:
        a = a[:, :, :, None]
    if a.ndim != 4:
        raise DimensionError(f"{name}: expected a batch of images, got shape {a.shape}")
    out = np.stack([check_image(a[i], f"{name}[{i}]") for i in range(a.shape[0])])
    return out


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} must share a shape, got {a.shape} vs {b.shape}")


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def to_nchw(batch: np.ndarray) -> np.ndarray:
    """(N, H, W, C) float32 -> (N, C, H, W) float32, contiguous."""
    return np.ascontiguousarray(np.transpose(batch, (0, 3, 1, 2)), dtype=np.float32)


def from_nchw(batch: np.ndarray) -> np.ndarray:
    """(N, C, H, W) -> (N, H, W, C), contiguous."""
    return np.ascontiguousarray(np.transpose(batch, (0, 2, 3, 1)))

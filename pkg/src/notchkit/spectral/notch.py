"""Notch-reject transfer functions and explicit frequency-domain filtering.

A notch specification lists openings by their frequency offset from DC;
every opening is applied together with its conjugate mirror so real images
stay real after filtering.  Distances between frequency bins are measured on
the frequency torus, which keeps the transfer exactly symmetric even for
openings at the Nyquist row/column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..errors import ConfigError, DimensionError
from ..validation import check_image
from .fft import Spectrum, fft2d, ifft2d

SHAPES = ("ideal", "gaussian")


@dataclass(frozen=True)
class NotchOpening:
    """One reject opening: centre offset (u, v) from DC, shape, and width.

    ``width`` is the hard radius for ideal openings and sigma for gaussian
    ones.  The conjugate mirror at (-u, -v) is implied, never listed.
    """
    u: int
    v: int
    shape: str = "ideal"
    width: float = 4.0

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ConfigError(f"notch shape must be one of {SHAPES}, got {self.shape!r}")
        if not (self.width > 0):
            raise ConfigError(f"notch width must be positive, got {self.width}")


@dataclass
class NotchSpec:
    """A set of notch openings plus the DC-protection choice."""
    openings: tuple[NotchOpening, ...] = ()
    protect_dc: bool = True

    def __post_init__(self) -> None:
        self.openings = tuple(self.openings)
        for op in self.openings:
            if not isinstance(op, NotchOpening):
                raise ConfigError(f"openings must be NotchOpening, got {type(op).__name__}")


def _torus_distance_sq(shape: tuple[int, int], u: int, v: int) -> np.ndarray:
    """Squared distance from every bin to offset (u, v), wrapped on the torus."""
    h, w = shape
    uu = np.arange(h) - h // 2
    vv = np.arange(w) - w // 2
    du = np.abs(uu - u)
    du = np.minimum(du, h - du)
    dv = np.abs(vv - v)
    dv = np.minimum(dv, w - dv)
    return (du.astype(np.float64) ** 2)[:, None] + (dv.astype(np.float64) ** 2)[None, :]


def build_notch_transfer(shape: tuple[int, int], spec: NotchSpec) -> np.ndarray:
    """Multiplicative reject transfer in [0, 1], DC-centred layout.

    Ideal openings zero a hard disk; gaussian openings apply
    1 - exp(-d^2 / (2 sigma^2)).  Openings multiply, each together with its
    mirror, so the transfer stays conjugate-symmetric.  The DC bin is forced
    back to 1 unless ``spec.protect_dc`` is off.
    """
    h, w = shape
    transfer = np.ones((h, w), dtype=np.float64)
    for op in spec.openings:
        for cu, cv in {(op.u, op.v), (_mirror_offset(op.u, h), _mirror_offset(op.v, w))}:
            d2 = _torus_distance_sq((h, w), cu, cv)
            if op.shape == "ideal":
                transfer[d2 <= op.width ** 2] = 0.0
            else:
                transfer *= 1.0 - np.exp(-d2 / (2.0 * op.width ** 2))
    if spec.protect_dc:
        transfer[h // 2, w // 2] = 1.0
    return transfer


def _mirror_offset(u: int, n: int) -> int:
    """Conjugate-mirror of a frequency offset on an n-point axis.

    Negating modulo n: most offsets map to -u, but the Nyquist offset -n/2
    has no +n/2 bin and mirrors onto itself.
    """
    return (((-u) % n) + n // 2) % n - n // 2


def mirror_offset_pair(u: int, v: int, shape: tuple[int, int]) -> tuple[int, int]:
    return _mirror_offset(u, shape[0]), _mirror_offset(v, shape[1])


def filter_spectrum(spectrum: Spectrum, transfer: np.ndarray) -> Spectrum:
    if transfer.shape != spectrum.shape:
        raise DimensionError(
            f"transfer shape {transfer.shape} does not match spectrum {spectrum.shape}")
    return Spectrum(spectrum.coeffs * transfer)


def apply_frequency_filter(image: np.ndarray, spec: NotchSpec) -> np.ndarray:
    """Filter an image through a notch spec: FFT, multiply, inverse, clip.

    Channels are filtered independently with the same transfer.  Output is
    float32 in [0, 1] with the input's shape.
    """
    img = check_image(image, "image")
    transfer = build_notch_transfer((img.shape[0], img.shape[1]), spec)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        out[:, :, c] = ifft2d(filter_spectrum(fft2d(img[:, :, c]), transfer))
    out = np.clip(out, 0.0, 1.0)
    return out if np.asarray(image).ndim == 3 else out[:, :, 0]


class NotchFilter2D(BaseEstimator, TransformerMixin):
    """Stateless notch-reject transformer over batches of images.

    ``fit`` only validates; ``transform`` maps (N, H, W, C) -> (N, H, W, C)
    through :func:`apply_frequency_filter`.
    """

    def __init__(self, openings=(), protect_dc: bool = True):
        self.openings = openings
        self.protect_dc = protect_dc

    def _spec(self) -> NotchSpec:
        ops = tuple(op if isinstance(op, NotchOpening) else NotchOpening(*op)
                    for op in self.openings)
        return NotchSpec(openings=ops, protect_dc=self.protect_dc)

    def fit(self, X=None, y=None):
        self._spec()  # validate eagerly
        return self

    def transform(self, X):
        from ..validation import check_batch
        batch = check_batch(X)
        spec = self._spec()
        return np.stack([apply_frequency_filter(batch[i], spec)
                         for i in range(batch.shape[0])])

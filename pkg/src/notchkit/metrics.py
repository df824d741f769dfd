"""Image-quality and artifact-visibility metrics.

PSNR, SSIM and cosine similarity quantify how close a reconstruction stays
to its source; the spike prominence score quantifies how loudly a periodic
artifact still rings in the spectrum.  All four are deterministic pure
functions of their inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError
from .spectral import Spectrum, detect_spikes, fft2d, luminance

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

# a strict local maximum only counts as a spike candidate once it stands a
# fifth above the background floor; the extreme-value fluctuations of a
# featureless spectrum live just below that (clean textures measure 1.3-1.4,
# white noise about the same), so weaker maxima are reported as "no spike"
SCORE_MIN_PROMINENCE = 1.2


def _pair(a, b, name_a: str, name_b: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    for name, arr in ((name_a, x), (name_b, y)):
        if arr.ndim not in (2, 3):
            raise DimensionError(f"{name}: expected (H, W) or (H, W, C), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DimensionError(f"{name}: contains non-finite values")
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {name_a} is {x.shape}, {name_b} is {y.shape}")
    if x.ndim == 2:
        x, y = x[:, :, None], y[:, :, None]
    return x, y


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with the peak fixed at 1.0.

    Identical inputs return ``inf``; callers that aggregate must treat that
    sentinel explicitly rather than average it away.
    """
    x, y = _pair(a, b, "a", "b")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _valid_windows(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, window.shape)
    return np.tensordot(view, window, axes=((2, 3), (0, 1)))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over an 11x11 Gaussian window (sigma 1.5).

    The standard luminance/contrast/structure product with K1 = 0.01,
    K2 = 0.03 and data range 1.0, evaluated on windows that fit entirely
    inside the image and averaged per channel, then across channels.
    """
    x, y = _pair(a, b, "a", "b")
    h, w, c = x.shape
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise DimensionError(
            f"ssim needs sides >= {_SSIM_WINDOW}, got {h}x{w}")
    lo = min(float(x.min()), float(y.min()))
    hi = max(float(x.max()), float(y.max()))
    if lo < -1e-5 or hi > 1.0 + 1e-5:
        raise DimensionError(
            f"ssim expects unit-interval images, got range [{lo:.4g}, {hi:.4g}]")
    window = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = _SSIM_K1 ** 2
    c2 = _SSIM_K2 ** 2
    per_channel = []
    for ch in range(c):
        xc, yc = x[:, :, ch], y[:, :, ch]
        mx = _valid_windows(xc, window)
        my = _valid_windows(yc, window)
        mxx = _valid_windows(xc * xc, window)
        myy = _valid_windows(yc * yc, window)
        mxy = _valid_windows(xc * yc, window)
        vx = mxx - mx * mx
        vy = myy - my * my
        cov = mxy - mx * my
        num = (2.0 * mx * my + c1) * (2.0 * cov + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        per_channel.append(float(np.mean(num / den)))
    return float(np.mean(per_channel))


def coss(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of the flattened images (scale-invariant)."""
    x, y = _pair(a, b, "a", "b")
    xf, yf = x.ravel(), y.ravel()
    na, nb = float(np.linalg.norm(xf)), float(np.linalg.norm(yf))
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine similarity is undefined for a zero image")
    return float(np.dot(xf, yf) / (na * nb))


def spike_prominence_score(image_or_spectrum) -> float:
    """Prominence of the strongest non-DC spectral spike; 1.0 when no
    strict local maximum clears the candidate threshold.

    Accepts an image (``(H, W)`` or ``(H, W, C)``, converted to luminance)
    or a precomputed DC-centred :class:`Spectrum`.  Real-valued input has a
    Hermitian spectrum, so the strongest spike always arrives as a
    conjugate pair — the score is the per-bin prominence of that pair.
    """
    if isinstance(image_or_spectrum, Spectrum):
        spectrum = image_or_spectrum
    else:
        arr = np.asarray(image_or_spectrum)
        if arr.ndim not in (2, 3):
            raise DimensionError(
                f"expected an image or Spectrum, got array shape {arr.shape}")
        spectrum = fft2d(luminance(arr))
    report = detect_spikes(spectrum, min_prominence=SCORE_MIN_PROMINENCE)
    return report.strongest_prominence()

"""Synthetic data: procedural clean textures and periodic-artifact fakes.

The "real" side is a procedural texture (periodic cosine shading + soft
torus-wrapped blobs + a random-phase pink detail field + faint grain) whose
spectrum falls off smoothly — no isolated bright bins, so spike detectors
stay quiet on it.  The "fake" side either re-upsamples a downsampled copy
through a seeded transposed convolution whose kernel size is not divisible
by the stride (the uneven overlap imprints a periodic checkerboard whose
spikes live at the stride-harmonic frequencies — the H/2 and W/2 family
for stride 2), or injects a single ground-truth sinusoid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, conv2d_transpose
from .errors import ConfigError, DataError, DimensionError
from .io.dataset import MANIFEST_NAME, PairedDataset, PairEntry
from .io.png import save_image
from .io.reports import write_report
from .rng import rng_for
from .validation import check_image, from_nchw, is_power_of_two, to_nchw


@dataclass(frozen=True)
class ArtifactConfig:
    """Geometry of the synthetic pairs and of the injected artifact.

    ``kind`` selects the fake generator: "checkerboard" uses stride /
    kernel_size / gain, "sinusoid" uses freq / amplitude / phase.
    """
    size: int = 64
    channels: int = 3
    kind: str = "checkerboard"
    stride: int = 2
    kernel_size: int = 3
    gain: float = 0.5
    freq: tuple[int, int] = (8, 5)
    amplitude: float = 0.1
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not is_power_of_two(self.size) or self.size < 16:
            raise ConfigError(f"size must be a power of two >= 16, got {self.size}")
        if self.channels not in (1, 3):
            raise ConfigError(f"channels must be 1 or 3, got {self.channels}")
        if self.kind == "checkerboard":
            if self.stride < 2:
                raise ConfigError(f"stride must be >= 2, got {self.stride}")
            if self.size % self.stride:
                raise ConfigError(f"stride {self.stride} must divide size {self.size}")
            if self.kernel_size < 2:
                raise ConfigError(f"kernel size must be >= 2, got {self.kernel_size}")
            if self.kernel_size % self.stride == 0:
                raise ConfigError(
                    f"kernel size {self.kernel_size} divisible by stride {self.stride}: "
                    "overlap is even and no checkerboard forms")
            if self.kernel_size < self.stride:
                raise ConfigError(
                    f"kernel size {self.kernel_size} below stride {self.stride} "
                    "leaves output pixels no tap reaches")
            if not (0.0 <= self.gain <= 1.0):
                raise ConfigError(f"gain must be in [0, 1], got {self.gain}")
        elif self.kind == "sinusoid":
            u, v = self.freq
            if (u, v) == (0, 0):
                raise ConfigError("sinusoid frequency (0, 0) is DC")
            if abs(u) > self.size // 2 or abs(v) > self.size // 2:
                raise ConfigError(f"frequency {self.freq} beyond Nyquist for size {self.size}")
            if not (0.0 <= self.amplitude <= 0.5):
                raise ConfigError(f"amplitude must be in [0, 0.5], got {self.amplitude}")
        else:
            raise ConfigError(f"unknown artifact kind {self.kind!r}")


@dataclass
class SyntheticPair:
    real: np.ndarray   # (H, W, C) float32 in [0, 1]
    fake: np.ndarray   # same shape
    entry: PairEntry


def procedural_texture(size: int, channels: int, rng: np.random.Generator) -> np.ndarray:
    """One clean texture; smooth spectrum, mixed soft and sharp content.

    Every component is periodic across the image (integer-cycle gradient,
    torus-wrapped blobs, FFT-shaped noise): the DFT sees the image as one
    period, and any wrap-seam discontinuity would paint sinc ridges through
    the spectrum that read as fake "spikes".
    """
    h = w = size
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, h, endpoint=False),
                         np.linspace(0.0, 1.0, w, endpoint=False), indexing="ij")

    # single-cycle cosine shading in a random lattice direction: gradient-
    # like, yet exactly periodic
    ky, kx = [(0, 1), (1, 0), (1, 1), (1, -1)][int(rng.integers(0, 4))]
    phi0 = rng.uniform(0.0, 2.0 * np.pi)
    shade = 0.5 - 0.5 * np.cos(2.0 * np.pi * (ky * yy + kx * xx) + phi0)
    img = np.empty((h, w, channels), dtype=np.float64)
    for c in range(channels):
        lo, hi = rng.uniform(0.34, 0.66, size=2)
        img[:, :, c] = lo + (hi - lo) * shade

    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.0, 1.0, size=2)
        sigma = rng.uniform(0.17, 0.24)
        # periodic summation over the 3x3 torus copies keeps the bump
        # smooth across the wrap (a plain min(d, 1-d) distance has a
        # derivative crease along the cut line, which shows up as a
        # spectral ridge)
        bump = np.zeros((h, w))
        for oy in (-1.0, 0.0, 1.0):
            for ox in (-1.0, 0.0, 1.0):
                bump += np.exp(-((yy - cy + oy) ** 2 + (xx - cx + ox) ** 2)
                               / (2.0 * sigma ** 2))
        amp = rng.uniform(-0.16, 0.16)
        for c in range(channels):
            img[:, :, c] += amp * rng.uniform(0.75, 1.25) * bump

    # soft-edged regions: level sets of a periodic random field, pushed
    # through a sigmoid.  This is the "cartoon" part of the texture —
    # curved boundaries a few pixels wide separating near-uniform patches,
    # the piecewise-smooth structure photographs are made of.  It matters
    # for the learned filter downstream: coherent edges are what a kernel
    # predictor can recognise and preserve, so a corpus built from them
    # keeps "structure vs injected noise" a learnable distinction.  Had the
    # detail been random-phase noise at full strength instead, the L1-
    # optimal filter would be an unconditional blur — and the whole
    # noise-as-license story this corpus exists to exercise would collapse.
    # The level field mixes a few low-order cosines with a broadband rough
    # component: cosines alone would put the sigmoid's harmonics on exact
    # integer bins — isolated hot bins that read as spikes — while the
    # rough wiggle makes each boundary irregular the way natural contours
    # are, smearing those harmonics into a smooth continuum.
    rough_f = np.fft.fft2(rng.standard_normal((h, w)))
    rough_f /= np.maximum(np.abs(rough_f), 1e-12)
    fr = np.hypot(np.fft.fftfreq(h)[:, None] * h, np.fft.fftfreq(w)[None, :] * w)
    band = np.exp(-0.5 * ((fr - 6.0) / 3.0) ** 2)
    band[0, 0] = 0.0
    rough = np.fft.ifft2(rough_f * band).real
    rough /= max(rough.std(), 1e-9)
    for _ in range(int(rng.integers(2, 4))):
        level = np.zeros((h, w))
        for _ in range(int(rng.integers(4, 7))):
            u, v = int(rng.integers(-3, 4)), int(rng.integers(-3, 4))
            if (u, v) == (0, 0):
                continue
            level += rng.normal() * np.cos(
                2.0 * np.pi * (u * xx + v * yy) + rng.uniform(0.0, 2.0 * np.pi))
        level /= max(level.std(), 1e-9)
        level += rough * rng.uniform(0.25, 0.45)
        width = rng.uniform(0.15, 0.35)   # edge transition of roughly 2-6 px
        mask = 1.0 / (1.0 + np.exp(-(level - rng.uniform(-0.4, 0.4)) / width))
        amp = rng.uniform(-0.14, 0.14)
        for c in range(channels):
            img[:, :, c] += amp * rng.uniform(0.8, 1.2) * mask

    # oriented ripple patches: short stripe segments — a windowed integer-
    # frequency cosine summed over torus copies.  They give the mid band
    # localised, oriented structure (the other thing filters must learn to
    # keep).  The window is kept SMALL on purpose: a wide window would
    # concentrate the patch into one hot spectral bin and read as a fake
    # spike, while these few-pixel patches spread over 2-3 bins and stay
    # below any detection threshold.  Frequencies stay out of the 9x9
    # annuli around the half-band lattice points — both directly and after
    # checkerboard modulation shifts them by the lattice vectors — so they
    # never contaminate the artifact measurement itself.
    for _ in range(int(rng.integers(3, 7))):
        while True:
            u, v = int(rng.integers(-8, 9)), int(rng.integers(-8, 9))
            if 5.0 <= max(abs(u), abs(v)) <= 8.0:
                break
        cy, cx = rng.uniform(0.0, 1.0, size=2)
        sigma = rng.uniform(0.045, 0.075)
        window = np.zeros((h, w))
        for oy in (-1.0, 0.0, 1.0):
            for ox in (-1.0, 0.0, 1.0):
                window += np.exp(-((yy - cy + oy) ** 2 + (xx - cx + ox) ** 2)
                                 / (2.0 * sigma ** 2))
        stripe = window * np.cos(
            2.0 * np.pi * (u * xx + v * yy) + rng.uniform(0.0, 2.0 * np.pi))
        amp = rng.uniform(0.02, 0.05)
        for c in range(channels):
            img[:, :, c] += amp * rng.uniform(0.8, 1.2) * stripe

    # faint pink-spectrum residue: random phase under a smooth falling
    # envelope.  Quiet — an irreducible floor, not a load-bearing detail
    # field.  Its real job is continuity: the structured components above
    # are built from discrete periodic terms, and without a continuum
    # filling the space between their bins, each one towers over a silent
    # annulus and reads as a spike.  The soft low shoulder keeps the floor
    # present down at the scene-layout frequencies (at a measured cost to
    # fake-side prominence, since content this low reappears, modulated,
    # in the rings measured around the checkerboard lattice points); the
    # high cut leaves the top octave to grain so the half-band artifact
    # bins sit against a quiet background.
    white_f = np.fft.fft2(rng.standard_normal((h, w)))
    phase = white_f / np.maximum(np.abs(white_f), 1e-12)
    fr = np.hypot(np.fft.fftfreq(h)[:, None] * h, np.fft.fftfreq(w)[None, :] * w)
    envelope = (1.0 + fr / 4.0) ** -rng.uniform(1.5, 1.9)
    envelope *= fr ** 2 / (fr ** 2 + 2.5 ** 2)
    envelope /= 1.0 + (fr / 18.0) ** 8
    envelope[0, 0] = 0.0   # mean comes from the shading, not the detail
    detail = np.fft.ifft2(envelope * phase).real
    detail /= max(detail.std(), 1e-9)
    amp = rng.uniform(0.014, 0.026)
    for c in range(channels):
        img[:, :, c] += amp * rng.uniform(0.85, 1.15) * detail

    # faint sensor-style grain (around a gray level): real photographs are
    # never spectrally silent, and the broadband floor keeps the spike
    # detector's global median honest instead of letting it collapse to
    # numerical residue.  Kept above the 8-bit quantization floor so that
    # saving to PNG barely moves any spectral statistic.
    grain = rng.uniform(0.003, 0.005)
    img += grain * rng.standard_normal((h, w, channels))

    # keep the image inside [0.02, ceiling] without clipping: clipping
    # flattens regions and sprays harmonics across the spectrum.  A pure
    # shift touches only DC; when the span itself is too wide, an affine
    # squeeze leaves every spike-prominence measurement exactly unchanged
    # (the detector normalises by the global median magnitude first).  The
    # ceiling also leaves headroom for the fake side's blend overshoot, and
    # is jittered so "brightest pixel" is not a constant of the dataset.
    ceiling = rng.uniform(0.88, 0.95)
    lo, hi = float(img.min()), float(img.max())
    if lo < 0.02 or hi > ceiling:
        if hi - lo <= ceiling - 0.02:
            img += (0.02 - lo) if lo < 0.02 else (ceiling - hi)
        else:
            img = 0.02 + (img - lo) * ((ceiling - 0.02) / (hi - lo))

    return np.clip(img, 0.0, 1.0).astype(np.float32)


def upsampling_kernel(kernel_size: int, stride: int, rng: np.random.Generator) -> np.ndarray:
    """A random positive kernel whose overlap-class gains carry the artifact.

    A stride-s transposed convolution reaches each output pixel through the
    taps of one (row % s, col % s) residue class, so the class sums are the
    periodic gain pattern the upsampling imprints.  Left at their raw
    uneven-overlap values those sums differ by tens of percent, which clips
    bright regions and costs far more reconstruction PSNR than upsampling
    artifacts are worth; instead the taps are rescaled class by class so the
    gains are 1 + d, with d drawn bin by bin in the pattern's own s x s
    frequency grid (random amplitude and sign per lattice bin, Hermitian so
    d is real).  Every checkerboard spike then has a guaranteed minimum
    strength and a bounded total energy.  The class gains average exactly 1,
    so mean brightness passes through unchanged.
    """
    k, s = kernel_size, stride
    # jittered tent profile: within a residue class the taps fall off from
    # the kernel centre the way a bilinear upsampler's do, which keeps the
    # per-phase filters alike at mid frequencies.  Flat random taps would
    # splash modulated copies of the texture's detail band across the top
    # octave and lift the spectrum's global median — the artifact's own
    # background — for no extra spike strength.
    centre = (k - 1) / 2.0
    tent = 1.0 - np.abs(np.arange(k) - centre) / ((k + 1) / 2.0)
    taps = np.outer(tent, tent) * rng.uniform(0.85, 1.15, size=(k, k))
    coeff = np.zeros((s, s), dtype=np.complex128)
    for a in range(s):
        for b in range(s):
            if (a, b) == (0, 0) or coeff[a, b] != 0:
                continue
            mag = rng.uniform(0.030, 0.042)
            am, bm = (-a) % s, (-b) % s
            if (am, bm) == (a, b):
                coeff[a, b] = mag * (1.0 if rng.uniform() < 0.5 else -1.0)
            else:
                coeff[a, b] = mag * np.exp(2j * np.pi * rng.uniform())
                coeff[am, bm] = np.conj(coeff[a, b])
    gains = 1.0 + np.fft.ifft2(coeff).real * (s * s)
    for a in range(s):
        for b in range(s):
            block = taps[a::s, b::s]
            taps[a::s, b::s] = block * (gains[a, b] / block.sum())
    return taps.astype(np.float32)


def checkerboard_fake(real: np.ndarray, config: ArtifactConfig,
                      rng: np.random.Generator | int) -> np.ndarray:
    """Down-average then re-upsample through a seeded transposed conv, blend.

    The output is ``(1 - gain) * real + gain * upsampled`` clipped to the
    unit interval.  ``rng`` may be a Generator or a plain integer seed.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    img = check_image(real, "real")
    h, w, c = img.shape
    s, k = config.stride, config.kernel_size
    if h % s or w % s:
        raise DimensionError(f"image {h}x{w} not divisible by stride {s}")
    x = to_nchw(img[None])
    down = x.reshape(1, c, h // s, s, w // s, s).mean(axis=(3, 5))

    kern = upsampling_kernel(k, s, rng)
    weight = np.zeros((c, c, k, k), dtype=np.float32)
    for ci in range(c):
        weight[ci, ci] = kern
    # wrap-pad before the transposed conv so the upsampling is circular:
    # without it the border rows receive partial tap sets, and that frame
    # of deviant gain paints straight lines through the spectrum along
    # both frequency axes — a seam cue that has nothing to do with the
    # checkerboard pattern under study
    pad = (k + s - 1) // s
    down = np.pad(down, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="wrap")
    up = conv2d_transpose(Tensor(down), Tensor(weight), stride=s).data
    off = s * pad + (k - s) // 2
    up = up[:, :, off:off + h, off:off + w]
    fake = (1.0 - config.gain) * img + config.gain * from_nchw(up)[0]
    return np.clip(fake, 0.0, 1.0).astype(np.float32)


def inject_sinusoid(image: np.ndarray, freq: tuple[int, int], amplitude: float,
                    phase: float = 0.0) -> np.ndarray:
    """Add one plane-wave cosine across all channels, clipped to [0, 1].

    ``freq`` is (u, v) in cycles per image, the same offsets-from-DC
    convention the spectral report uses.
    """
    img = check_image(image, "image")
    h, w, _ = img.shape
    u, v = freq
    if (u, v) == (0, 0):
        raise ConfigError("sinusoid frequency (0, 0) is DC, nothing to inject")
    if abs(u) > h // 2 or abs(v) > w // 2:
        raise ConfigError(f"frequency {freq} beyond Nyquist for {h}x{w}")
    if not (0.0 <= amplitude <= 0.5):
        raise ConfigError(f"amplitude must be in [0, 0.5], got {amplitude}")
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    wave = amplitude * np.cos(2.0 * np.pi * (u * yy / h + v * xx / w) + phase)
    out = np.clip(img + wave[:, :, None].astype(np.float32), 0.0, 1.0)
    return out if np.asarray(image).ndim == 3 else out[:, :, 0]


def make_pair(config: ArtifactConfig, seed: int, index: int) -> SyntheticPair:
    """Deterministically build pair ``index`` of the dataset stream ``seed``."""
    real = procedural_texture(config.size, config.channels, rng_for(seed, index, "real"))
    if config.kind == "checkerboard":
        fake = checkerboard_fake(real, config, rng_for(seed, index, "fake"))
        entry = PairEntry(filename=f"{index:05d}.png", kind="checkerboard",
                          stride=config.stride, kernel_size=config.kernel_size,
                          gain=config.gain, seed=seed)
    else:
        fake = inject_sinusoid(real, config.freq, config.amplitude, config.phase)
        entry = PairEntry(filename=f"{index:05d}.png", kind="sinusoid",
                          stride=0, kernel_size=0, gain=config.amplitude, seed=seed)
    return SyntheticPair(real=real, fake=fake, entry=entry)


def generate_dataset(out_dir: str | Path, n: int, config: ArtifactConfig,
                     seed: int, overwrite: bool = False) -> PairedDataset:
    """Write ``n`` pairs under ``out_dir`` (real/, fake/, manifest.csv)."""
    if n < 1:
        raise ConfigError(f"dataset size must be >= 1, got {n}")
    if not (64 <= config.size <= 256):
        raise ConfigError(f"dataset image size must be in [64, 256], got {config.size}")
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not overwrite:
        raise DataError(
            f"output directory {out_dir} is not empty; pass overwrite to replace it")
    rows = []
    for i in range(n):
        pair = make_pair(config, seed, i)
        save_image(pair.real, out_dir / "real" / pair.entry.filename)
        save_image(pair.fake, out_dir / "fake" / pair.entry.filename)
        rows.append({"filename": pair.entry.filename, "kind": pair.entry.kind,
                     "stride": pair.entry.stride, "kernel": pair.entry.kernel_size,
                     "gain": pair.entry.gain, "seed": pair.entry.seed})
    write_report(rows, out_dir / MANIFEST_NAME)
    return PairedDataset.open(out_dir)

"""Learned per-pixel kernel filtering.

A small encoder-decoder predicts one K x K kernel per pixel from the input
image; the image is then reconstructed in a single pixel-wise filtering
pass.  Trained on (noisy fake, clean real) pairs with an L1 loss, the
predictor learns to keep detail where the input is clean and to average
the injected noise — and the periodic artifact riding on it — away where
it is not.  Because every kernel is a softmax, each output pixel is a
convex combination of its neighbourhood: the filter can only redistribute
local mass, never invent structure, which is what makes the added noise a
necessary license for artifact removal rather than an optional garnish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from sklearn.base import BaseEstimator

from .autodiff import (OptimizerState, Tensor, adam_step, avg_pool2d,
                       concat_channels, conv2d, filter_with_kernels, l1_loss,
                       relu, softmax_channels, upsample_bilinear)
from .errors import (ConfigError, DataError, DimensionError, NotFittedError,
                     NumericError)
from .io.checkpoint import ModelCheckpoint
from .io.dataset import PairedDataset
from .rng import rng_for
from .validation import check_image, from_nchw, to_nchw

_KERNEL_SIZES = (3, 5)
_BASE_WIDTH = 16
_SUM_TOL = 1e-5


# ---------------------------------------------------------------------------
# noise specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """What noise to inject before filtering, in 8-bit units.

    ``family`` is "gaussian" (``mean``/``sigma``) or "uniform"
    (``low``/``high``).  ``alpha`` is the area fraction that actually
    receives noise — placed at random by ``sample`` or handed to a guidance
    map via ``sample_values``; amplitudes are scaled by ``1/alpha`` so the
    total injected energy stays comparable as coverage shrinks.
    """
    family: str = "gaussian"
    sigma: float = 10.0
    mean: float = 0.0
    low: float = -20.0
    high: float = 20.0
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in ("gaussian", "uniform"):
            raise ConfigError(f"unknown noise family {self.family!r}")
        if self.family == "gaussian" and self.sigma <= 0:
            raise ConfigError(f"gaussian sigma must be > 0, got {self.sigma}")
        if self.family == "uniform" and not self.low < self.high:
            raise ConfigError(
                f"uniform bounds must satisfy low < high, got [{self.low}, {self.high}]")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")

    def sample_values(self, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        """Noise values only, on the unit-interval scale, energy-compensated.

        No placement mask is applied even when alpha < 1 — use this when an
        external guidance map decides where the noise lands.
        """
        if self.family == "gaussian":
            raw = rng.standard_normal(shape) * self.sigma + self.mean
        else:
            raw = rng.uniform(self.low, self.high, shape)
        return (raw / (255.0 * self.alpha)).astype(np.float32)

    def sample(self, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        """Draw a noise map; at alpha < 1 the coverage is placed at random.

        Each element independently receives noise with probability alpha
        (the random-placement baseline that guided placement is compared
        against); amplitudes carry the 1/alpha compensation so the injected
        energy is constant in expectation as coverage shrinks.  At alpha = 1
        this is exactly ``sample_values`` — same draws, same bits.
        """
        values = self.sample_values(shape, rng)
        if self.alpha >= 1.0:
            return values
        mask = rng.random(shape) < self.alpha
        return values * mask.astype(np.float32)


# ---------------------------------------------------------------------------
# kernel fields
# ---------------------------------------------------------------------------

@dataclass
class KernelField:
    """One normalised K x K kernel per pixel, shared across channels."""
    weights: np.ndarray   # (H, W, K*K) float32, each pixel summing to 1

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float32)
        if w.ndim != 3:
            raise DimensionError(f"kernel field must be (H, W, K*K), got {w.shape}")
        k = int(round(w.shape[2] ** 0.5))
        if k * k != w.shape[2] or k % 2 == 0 or k not in _KERNEL_SIZES:
            raise DimensionError(
                f"kernel field needs K*K channels with odd K in {_KERNEL_SIZES}, "
                f"got {w.shape[2]}")
        sums = w.sum(axis=2)
        worst = float(np.abs(sums - 1.0).max())
        if worst > _SUM_TOL:
            raise NumericError(
                f"kernel field not normalised: per-pixel sums deviate by {worst:.2e}")
        self.weights = w

    @property
    def kernel_size(self) -> int:
        return int(round(self.weights.shape[2] ** 0.5))

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape[0], self.weights.shape[1]

    def kernel_at(self, row: int, col: int) -> np.ndarray:
        k = self.kernel_size
        return self.weights[row, col].reshape(k, k)

    def mean_tv_from_identity(self) -> float:
        """Mean total-variation distance of the kernels from a centre delta.

        For a kernel p and the delta d, TV(p, d) = 0.5 * sum|p - d|, which
        for normalised nonnegative p reduces to 1 - p_centre.  Near 0 means
        the field passes the image through; near 1 means heavy mixing.
        """
        centre = self.weights.shape[2] // 2
        return float(1.0 - self.weights[:, :, centre].mean())


def pixelwise_filter(image: np.ndarray, kernels: KernelField) -> np.ndarray:
    """Filter each pixel with its own kernel (replicate borders).

    The same kernel field is applied to every channel; the output is a
    per-pixel convex combination of the input neighbourhood, clamped to
    [0, 1] (a no-op up to rounding, since convex combinations of unit-
    interval values cannot leave it).
    """
    img = check_image(image, "image")
    h, w, _ = img.shape
    if kernels.shape != (h, w):
        raise DimensionError(
            f"kernel field {kernels.shape} does not match image {h}x{w}")
    x = to_nchw(img[None])
    kf = kernels.weights.transpose(2, 0, 1)[None]
    out = filter_with_kernels(Tensor(x), Tensor(kf)).data
    out = np.clip(from_nchw(out)[0], 0.0, 1.0)
    return out if np.asarray(image).ndim == 3 else out[:, :, 0]


# ---------------------------------------------------------------------------
# the kernel-prediction model
# ---------------------------------------------------------------------------

_LAYER_PLAN = (
    # name, (out_ch, in_ch) for the 3x3 stages; head is appended per K.
    # Two convs per scale: one is not enough to both flatten the injected
    # noise and keep edges — the refit conv at each resolution buys most of
    # the reconstruction quality for ~60k extra weights.
    ("enc1", (_BASE_WIDTH, 3)),
    ("enc1b", (_BASE_WIDTH, _BASE_WIDTH)),
    ("enc2", (_BASE_WIDTH * 2, _BASE_WIDTH)),
    ("enc2b", (_BASE_WIDTH * 2, _BASE_WIDTH * 2)),
    ("enc3", (_BASE_WIDTH * 4, _BASE_WIDTH * 2)),
    ("enc3b", (_BASE_WIDTH * 4, _BASE_WIDTH * 4)),
    ("dec2", (_BASE_WIDTH * 2, _BASE_WIDTH * 4 + _BASE_WIDTH * 2)),
    ("dec2b", (_BASE_WIDTH * 2, _BASE_WIDTH * 2)),
    ("dec1", (_BASE_WIDTH, _BASE_WIDTH * 2 + _BASE_WIDTH)),
    ("dec1b", (_BASE_WIDTH, _BASE_WIDTH)),
)


class KpnModel:
    """Three-scale encoder-decoder emitting K*K kernel logits per pixel.

    Two conv3x3 + ReLU per scale, average-pool downsampling, bilinear
    upsampling with skip concatenation, and a final 1x1 projection.  The
    channel layout is fixed (16/32/64); only the kernel size is a choice.
    """

    def __init__(self, params: dict[str, Tensor], kernel_size: int):
        if kernel_size not in _KERNEL_SIZES:
            raise ConfigError(f"kernel size must be one of {_KERNEL_SIZES}, got {kernel_size}")
        self.params = params
        self.kernel_size = kernel_size

    # -- construction --------------------------------------------------------

    @classmethod
    def initialise(cls, kernel_size: int = 3, seed: int = 0) -> "KpnModel":
        if kernel_size not in _KERNEL_SIZES:
            raise ConfigError(f"kernel size must be one of {_KERNEL_SIZES}, got {kernel_size}")
        rng = rng_for(seed, "kpn-init")
        params: dict[str, Tensor] = {}
        for name, (out_ch, in_ch) in _LAYER_PLAN:
            params[f"{name}.weight"] = _he_conv(rng, out_ch, in_ch, 3)
            params[f"{name}.bias"] = Tensor(np.zeros(out_ch, np.float32), requires_grad=True)
        k2 = kernel_size * kernel_size
        params["head.weight"] = Tensor(
            (0.01 * rng.standard_normal((k2, _BASE_WIDTH, 1, 1))).astype(np.float32),
            requires_grad=True)
        params["head.bias"] = Tensor(np.zeros(k2, np.float32), requires_grad=True)
        return cls(params, kernel_size)

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    # -- forward --------------------------------------------------------------

    def kernel_logits(self, x: Tensor) -> Tensor:
        """(N, 3, H, W) -> (N, K*K, H, W) raw logits; H, W divisible by 4."""
        _, _, h, w = x.shape
        if h % 4 or w % 4:
            raise DimensionError(
                f"model needs dims divisible by 4 (two pooling levels), got {h}x{w}")
        p = self.params

        def block(t: Tensor, name: str) -> Tensor:
            t = relu(conv2d(t, p[f"{name}.weight"], p[f"{name}.bias"], padding=1))
            return relu(conv2d(t, p[f"{name}b.weight"], p[f"{name}b.bias"], padding=1))

        e1 = block(x, "enc1")
        e2 = block(avg_pool2d(e1, 2), "enc2")
        e3 = block(avg_pool2d(e2, 2), "enc3")
        d2 = block(concat_channels([upsample_bilinear(e3, 2), e2]), "dec2")
        d1 = block(concat_channels([upsample_bilinear(d2, 2), e1]), "dec1")
        return conv2d(d1, p["head.weight"], p["head.bias"])

    def kernel_field_tensor(self, x: Tensor) -> Tensor:
        return softmax_channels(self.kernel_logits(x))

    # -- persistence ----------------------------------------------------------

    def to_checkpoint(self) -> ModelCheckpoint:
        return ModelCheckpoint(
            kind="kpn",
            meta={"kernel_size": str(self.kernel_size),
                  "base_width": str(_BASE_WIDTH)},
            params={name: p.data for name, p in self.params.items()})

    @classmethod
    def from_checkpoint(cls, ckpt: ModelCheckpoint) -> "KpnModel":
        if ckpt.kind != "kpn":
            raise DataError(f"expected a kpn checkpoint, got kind {ckpt.kind!r}")
        try:
            kernel_size = int(ckpt.meta["kernel_size"])
        except (KeyError, ValueError) as e:
            raise DataError(f"kpn checkpoint missing kernel_size metadata: {e}") from e
        model = cls.initialise(kernel_size=kernel_size, seed=0)
        for name, p in model.params.items():
            stored = ckpt.params.get(name)
            if stored is None:
                raise DataError(f"kpn checkpoint missing parameter {name!r}")
            if stored.shape != p.data.shape:
                raise DataError(
                    f"kpn parameter {name!r} has shape {stored.shape}, "
                    f"expected {p.data.shape}")
            p.data = stored.copy()
        extra = set(ckpt.params) - set(model.params)
        if extra:
            raise DataError(f"kpn checkpoint has unknown parameters {sorted(extra)}")
        return model


def _he_conv(rng: np.random.Generator, out_ch: int, in_ch: int, k: int) -> Tensor:
    fan_in = in_ch * k * k
    w = rng.standard_normal((out_ch, in_ch, k, k)) * np.sqrt(2.0 / fan_in)
    return Tensor(w.astype(np.float32), requires_grad=True)


def _prediction_input(batch_nchw: np.ndarray) -> np.ndarray:
    """The predictor is wired for three channels; tile grey inputs."""
    if batch_nchw.shape[1] == 1:
        return np.repeat(batch_nchw, 3, axis=1)
    return batch_nchw


def kpn_predict_kernels(model: KpnModel, image: np.ndarray) -> KernelField:
    """Predict the per-pixel kernel field for one image (deterministic)."""
    img = check_image(image, "image")
    x = Tensor(_prediction_input(to_nchw(img[None])))
    kf = model.kernel_field_tensor(x).data[0]
    return KernelField(weights=np.ascontiguousarray(kf.transpose(1, 2, 0)))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class KpnTrainResult:
    model: KpnModel
    step_losses: list[float] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)


def train_kpn(dataset: PairedDataset, noise: NoiseSpec | None,
              epochs: int = 12, batch: int = 4, lr: float = 4e-3,
              seed: int = 0, kernel_size: int = 3) -> KpnTrainResult:
    """Train the kernel predictor on (noised fake, real) pairs with L1 loss.

    Noise is redrawn fresh at every step.  ``noise=None`` trains without
    any injection — the degenerate task used to calibrate the near-identity
    kernel check (a NoiseSpec itself cannot express zero noise).  Fully
    deterministic for a given seed: same seed, same data, same checkpoint.
    """
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if batch < 1:
        raise ConfigError(f"batch must be >= 1, got {batch}")
    if len(dataset) < 1:
        raise DataError("cannot train on an empty dataset")
    reals, fakes = dataset.load_all()
    reals = to_nchw(reals)
    fakes = to_nchw(fakes)
    n = reals.shape[0]

    model = KpnModel.initialise(kernel_size=kernel_size, seed=seed)
    state = OptimizerState(lr=lr)
    rng = rng_for(seed, "kpn-train")
    result = KpnTrainResult(model=model)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_sum, epoch_batches = 0.0, 0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            fake_b = fakes[idx]
            real_b = reals[idx]
            if noise is not None:
                noised = np.clip(fake_b + noise.sample(fake_b.shape, rng), 0.0, 1.0)
            else:
                noised = fake_b
            x = Tensor(noised)
            kernels = model.kernel_field_tensor(Tensor(_prediction_input(noised)))
            recon = filter_with_kernels(x, kernels)
            loss = l1_loss(recon, Tensor(real_b))
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericError(f"training loss became non-finite at step {step}")
            for p in model.params.values():
                p.zero_grad()
            loss.backward()
            adam_step(model.params, state)
            result.step_losses.append(value)
            epoch_sum += value
            epoch_batches += 1
            step += 1
        result.epoch_losses.append(epoch_sum / epoch_batches)
    return result


# ---------------------------------------------------------------------------
# reconstruction (the full noise -> predict -> filter pass)
# ---------------------------------------------------------------------------

def reconstruction_graph(model: KpnModel, fake: np.ndarray,
                         noise: NoiseSpec, guidance: np.ndarray | None = None,
                         seed: int = 0) -> Tensor:
    """Build the reconstruction as an op graph and return the output tensor.

    Exposed separately so the shape of the computation itself is testable:
    the graph must end in the single pixel-wise filtering op — nothing is
    resampled or post-processed after kernel application.
    """
    img = check_image(fake, "fake")
    h, w, c = img.shape
    rng = rng_for(seed, "reconstruct-noise")
    if guidance is None:
        # random placement: the spec's own mask (a no-op at alpha = 1)
        noise_map = noise.sample((h, w, c), rng)
    else:
        g = np.asarray(guidance)
        if g.shape != img.shape:
            raise DimensionError(
                f"guidance map {g.shape} does not match image {img.shape}")
        bad = (g != 0) & (g != 1)
        if bad.any():
            raise DataError("guidance map must be strictly binary")
        # guided placement: the guidance map owns coverage, so draw bare
        # values — masking twice would halve the effective alpha
        noise_map = noise.sample_values((h, w, c), rng) * g.astype(np.float32)
    noised = to_nchw(np.clip(img + noise_map, 0.0, 1.0)[None])
    x = Tensor(noised)
    kernels = model.kernel_field_tensor(Tensor(_prediction_input(noised)))
    return filter_with_kernels(x, kernels)


def deepnotch_reconstruct(model: KpnModel, fake: np.ndarray, noise: NoiseSpec,
                          guidance: np.ndarray | None = None,
                          seed: int = 0) -> np.ndarray:
    """Noise the fake (optionally only where guidance is 1), predict kernels
    from the noised image, filter once.  At full coverage an all-ones
    guidance is bitwise identical to no guidance at the same seed: the
    value draw is shared and neither path masks it."""
    out = reconstruction_graph(model, fake, noise, guidance, seed).data
    recon = np.clip(from_nchw(out)[0], 0.0, 1.0)
    return recon if np.asarray(fake).ndim == 3 else recon[:, :, 0]


# ---------------------------------------------------------------------------
# estimator wrapper
# ---------------------------------------------------------------------------

class KernelPredictionDenoiser(BaseEstimator):
    """sklearn-style wrapper: fit a KPN on a paired dataset, then transform
    fake images into reconstructions.

    Parameters mirror ``train_kpn`` and ``NoiseSpec``; ``fit`` accepts a
    ``PairedDataset`` (the natural unit of supervision here — X/y arrays
    would misrepresent that pairs and noise draws belong together).
    """

    def __init__(self, kernel_size: int = 3, family: str = "gaussian",
                 sigma: float = 10.0, low: float = -20.0, high: float = 20.0,
                 alpha: float = 1.0, epochs: int = 12, batch: int = 4,
                 lr: float = 4e-3, seed: int = 0):
        self.kernel_size = kernel_size
        self.family = family
        self.sigma = sigma
        self.low = low
        self.high = high
        self.alpha = alpha
        self.epochs = epochs
        self.batch = batch
        self.lr = lr
        self.seed = seed

    def _noise_spec(self) -> NoiseSpec:
        return NoiseSpec(family=self.family, sigma=self.sigma,
                         low=self.low, high=self.high, alpha=self.alpha)

    def fit(self, dataset: PairedDataset, y=None) -> "KernelPredictionDenoiser":
        result = train_kpn(dataset, self._noise_spec(), epochs=self.epochs,
                           batch=self.batch, lr=self.lr, seed=self.seed,
                           kernel_size=self.kernel_size)
        self.model_ = result.model
        self.step_losses_ = result.step_losses
        self.epoch_losses_ = result.epoch_losses
        return self

    def transform(self, images: np.ndarray) -> np.ndarray:
        """Reconstruct a stack of images (N, H, W, C) -> (N, H, W, C)."""
        if not hasattr(self, "model_"):
            raise NotFittedError("KernelPredictionDenoiser is not fitted yet")
        arr = np.asarray(images)
        if arr.ndim != 4:
            raise DimensionError(f"expected (N, H, W, C), got {arr.shape}")
        spec = self._noise_spec()
        return np.stack([
            deepnotch_reconstruct(self.model_, arr[i], spec,
                                  seed=int(rng_for(self.seed, "transform", i)
                                           .integers(0, 2**31)))
            for i in range(arr.shape[0])])

"""Spectral spike detection.

Periodic artifacts show up as isolated bright bins far from DC.  Detection
works on the compressed magnitude L = log1p(|F| / m) where m is the global
median magnitude outside a small DC disk — the normalisation makes the
scale of L comparable across images.  A bin is a spike when it is a strict
local maximum and its L value stands sufficiently above the median L of the
surrounding annulus (a 9x9 window minus the central 3x3, taken on the
frequency torus).  The annulus median is floored at log1p(2): a bin has to
at least double the global background before it registers at all.  Without
the floor, ordinary extreme-value fluctuations of an empty band (|F| around
3x the median happens a handful of times per 64x64 spectrum) would score as
if they stood over a real pedestal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .fft import Spectrum
from .notch import mirror_offset_pair

_WINDOW = 4   # half-width of the context window (9x9)
_CORE = 1     # half-width of the excluded core (3x3)
_FLOOR = float(np.log1p(2.0))


@dataclass(frozen=True)
class Spike:
    u: int                # frequency offset from DC, rows
    v: int                # frequency offset from DC, cols
    magnitude: float      # raw |F| at the bin
    prominence: float
    paired: bool          # conjugate mirror also detected


@dataclass
class SpikeReport:
    spikes: list[Spike] = field(default_factory=list)
    global_median: float = 0.0
    shape: tuple[int, int] = (0, 0)

    @property
    def best(self) -> Spike | None:
        return self.spikes[0] if self.spikes else None

    def strongest_prominence(self) -> float:
        return self.spikes[0].prominence if self.spikes else 1.0

    def locations(self) -> list[tuple[int, int]]:
        return [(s.u, s.v) for s in self.spikes]


def detect_spikes(spectrum: Spectrum, min_prominence: float = 4.0,
                  dc_exclusion_radius: int = 3) -> SpikeReport:
    """Find isolated bright bins in a DC-centred spectrum.

    Deterministic and permutation-stable: spikes are sorted by descending
    prominence with (u, v) as the tie-break.  Conjugate mirrors of real
    input land at equal magnitude, so genuine spikes come in pairs (a
    Nyquist bin is its own mirror and counts as paired).
    """
    if min_prominence <= 1.0:
        raise ConfigError(f"min_prominence must exceed 1, got {min_prominence}")
    h, w = spectrum.shape
    mag = spectrum.magnitude()
    dc = spectrum.dc_index

    uu = np.arange(h)[:, None] - dc[0]
    vv = np.arange(w)[None, :] - dc[1]
    outside_dc = (uu * uu + vv * vv) > dc_exclusion_radius ** 2
    vals = mag[outside_dc]
    global_median = float(np.median(vals)) if vals.size else 0.0
    scale = global_median if global_median > 0 else 1.0
    lmag = np.log1p(mag / scale)

    # strict local maxima on the torus (8-neighbourhood)
    is_max = np.ones((h, w), dtype=bool)
    for du in (-1, 0, 1):
        for dv in (-1, 0, 1):
            if du == 0 and dv == 0:
                continue
            is_max &= lmag > np.roll(np.roll(lmag, du, axis=0), dv, axis=1)
    candidates = np.argwhere(is_max & outside_dc & (lmag > _FLOOR))

    found: dict[tuple[int, int], tuple[float, float]] = {}
    for i, j in candidates:
        win = np.roll(np.roll(lmag, _WINDOW - i, axis=0), _WINDOW - j, axis=1)[
            :2 * _WINDOW + 1, :2 * _WINDOW + 1]
        annulus = win.copy()
        annulus[_WINDOW - _CORE:_WINDOW + _CORE + 1,
                _WINDOW - _CORE:_WINDOW + _CORE + 1] = np.nan
        med = float(np.nanmedian(annulus))
        prominence = float(lmag[i, j] / max(med, _FLOOR))
        if prominence >= min_prominence:
            found[(int(i - dc[0]), int(j - dc[1]))] = (prominence, float(mag[i, j]))

    spikes = []
    for (u, v), (prom, m) in found.items():
        mu, mv = mirror_offset_pair(u, v, (h, w))
        spikes.append(Spike(u=u, v=v, magnitude=m, prominence=prom,
                            paired=(mu, mv) in found))
    spikes.sort(key=lambda s: (-s.prominence, s.u, s.v))
    return SpikeReport(spikes=spikes, global_median=global_median, shape=(h, w))

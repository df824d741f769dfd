"""Frequency-domain analysis: FFT, notch filtering, spike detection."""

from .fft import Spectrum, fft2d, ifft2d, luminance
from .geometry import (GeometricShiftResult, geometric_spectrum_shift,
                       rotate_image, spike_angle_deg, upscale_image)
from .notch import (NotchFilter2D, NotchOpening, NotchSpec,
                    apply_frequency_filter, build_notch_transfer,
                    filter_spectrum, mirror_offset_pair)
from .spikes import Spike, SpikeReport, detect_spikes

__all__ = [
    "Spectrum", "fft2d", "ifft2d", "luminance",
    "NotchSpec", "NotchOpening", "NotchFilter2D",
    "build_notch_transfer", "apply_frequency_filter", "filter_spectrum",
    "mirror_offset_pair",
    "Spike", "SpikeReport", "detect_spikes",
    "GeometricShiftResult", "geometric_spectrum_shift",
    "rotate_image", "upscale_image", "spike_angle_deg",
]

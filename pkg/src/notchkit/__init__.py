"""notchkit: frequency-notch analysis and learned per-pixel filtering
for periodic upsampling artifacts in images."""

__version__ = "0.1.0"

"""Exception taxonomy shared across the package.

Each class maps to one process exit code in the CLI (see ``notchkit.cli``):
config/usage problems exit 2, data problems exit 3, numeric failures exit 4.
"""


class NotchkitError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(NotchkitError):
    """Invalid configuration: bad flag value, malformed config file,
    inconsistent parameter combination."""


class DataError(NotchkitError):
    """Invalid or unreadable data: bad image file, corrupt checkpoint,
    missing dataset entry, shape mismatch against a stored model."""


class DimensionError(DataError):
    """An array has an unsupported shape for the requested operation
    (e.g. non-power-of-two side fed to the FFT without padding)."""


class NumericError(NotchkitError):
    """A numeric invariant broke at runtime: NaN/Inf in a forward or
    backward pass, non-finite training loss, failed gradient check."""


class NotFittedError(NotchkitError, ValueError):
    """An estimator method that needs a fitted model was called before
    ``fit`` (kept a ``ValueError`` so sklearn tooling recognises it)."""

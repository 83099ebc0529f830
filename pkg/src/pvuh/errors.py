"""Exception types shared across the package.

Contract violations on in-process APIs raise ``ValueError``; the classes
here cover failures the CLI reports as named one-line errors.
"""


class PvuhError(Exception):
    """Base class for named pipeline errors."""


class ContainerError(PvuhError):
    """Malformed, truncated, or corrupted sequence container."""


class CheckpointError(PvuhError):
    """Malformed checkpoint or architecture mismatch on load."""


class ConfigError(PvuhError):
    """Invalid or unknown run-configuration key/value."""


class DataError(PvuhError):
    """Dataset-level failure (empty scan, missing channels, bad split)."""


class DivergenceError(PvuhError):
    """Training loss became non-finite."""

"""Exception types shared across the lab."""


class GkdvLabError(Exception):
    """Base class for all lab-specific failures."""


class ResolutionError(GkdvLabError):
    """Requested construction does not fit on any acceptable grid."""


class ModelError(GkdvLabError):
    """Field/model mismatch (realness, family, sign conventions)."""


class ConfigurationError(GkdvLabError):
    """Invalid run configuration (stability bound, unknown keys, bad values)."""


class BlowUpError(GkdvLabError):
    """Solution amplitude exploded; carries the last valid time."""

    def __init__(self, message, last_valid_time):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class InsufficientDataError(GkdvLabError):
    """Operation needs more snapshots than the trajectory provides."""


class DegenerateFieldError(GkdvLabError):
    """Zero or near-zero field where a nonzero one is required."""

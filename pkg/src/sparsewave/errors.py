"""Exception types shared across the package."""


class SparseWaveError(Exception):
    """Base class for all package errors."""


class InvalidPotentialError(SparseWaveError, ValueError):
    pass


class ResolutionError(SparseWaveError):
    """The sphere grid cannot resolve the phase of an oscillatory kernel."""

    def __init__(self, message, required_degree=None):
        super().__init__(message)
        self.required_degree = required_degree


class TruncationError(SparseWaveError, ValueError):
    """Coefficients above the grid's band limit were supplied."""

    def __init__(self, message, max_degree=None, overflow_norm=None):
        super().__init__(message)
        self.max_degree = max_degree
        self.overflow_norm = overflow_norm


class NonConvergenceError(SparseWaveError):
    def __init__(self, message, contraction=None):
        super().__init__(message)
        self.contraction = contraction


class StiffnessError(SparseWaveError):
    def __init__(self, message, smallest_reliable_r=None):
        super().__init__(message)
        self.smallest_reliable_r = smallest_reliable_r


class StepSizeError(SparseWaveError):
    pass


class CertificateFailure(SparseWaveError):
    """Raised when the amplitude vanishes on the probe set of an entropy certificate."""


class ConfigError(SparseWaveError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

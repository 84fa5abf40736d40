class QEDiskError(Exception):
    """Base class for all errors raised by qedisk."""


class DomainError(QEDiskError, ValueError):
    """Argument outside the domain of a formula (e.g. non-positive frequency)."""


class CoefficientsUnavailable(QEDiskError, KeyError):
    """No Green's-series coefficients stored for the requested (z, omega)."""

    def __str__(self):
        return Exception.__str__(self)


class UnphysicalInputError(QEDiskError, ValueError):
    """Inputs produce an unphysical result, e.g. a negative Purcell factor."""


class SupportTooNarrowError(QEDiskError):
    """A frequency integral still carries significant weight at the support edge."""


class KernelConvergenceError(QEDiskError):
    """Memory-kernel quadrature did not converge under grid refinement."""


class FitConsistencyError(QEDiskError):
    """Optimizer residual and independently recomputed residual disagree."""


class NotConvergedError(QEDiskError):
    """A dynamics result failed its step-halving check and cannot be used."""


class ConfigError(QEDiskError, ValueError):
    """Run configuration is invalid."""

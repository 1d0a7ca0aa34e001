"""Exception types raised by :mod:`cptsense`."""


class CptSenseError(Exception):
    """Base class for all package errors."""


class SingularLiouvillian(CptSenseError):
    """The steady state of the master equation is not unique."""


class StepTooCoarse(CptSenseError, ValueError):
    """Integration step too large to resolve the excited-state lifetime."""


class MismatchedPaths(CptSenseError, ValueError):
    """Bath paths with differing time step or length were combined."""


class DegeneratePosterior(CptSenseError):
    """All posterior weights underflowed.

    Usually means the grid is too narrow for the data or the model is
    badly mis-specified.
    """

    def __init__(self, message, bin_index=None, run_index=None):
        super().__init__(message)
        self.bin_index = bin_index
        self.run_index = run_index


class AlignmentError(CptSenseError, ValueError):
    """Estimate and truth series do not share a time base."""


class QuadratureNotConverged(CptSenseError):
    """Gauss-Hermite refinement changed the result by more than the tolerance."""


class AssumptionViolated(CptSenseError):
    """The large-information assumption behind the causal bound does not hold.

    The bound is still computed and carried on the exception as ``value``.
    """

    def __init__(self, message, value, info_product):
        super().__init__(message)
        self.value = value
        self.info_product = info_product


class NotPositiveDefinite(CptSenseError):
    """Fisher information matrix is not positive definite."""

"""Exception hierarchy shared by all modules."""


class LvgmError(Exception):
    """Base class for every error raised by this package."""


class NotPositiveDefinite(LvgmError):
    """Cholesky hit a non-positive pivot."""


class IllConditioned(LvgmError):
    """Condition estimate exceeded the configured limit."""


class NoConvergence(LvgmError):
    """Jacobi sweeps exhausted before off-diagonal mass vanished."""


class NumericalBreakdown(LvgmError):
    """Simplex was forced onto a pivot too small to trust."""


class SolverDegenerate(LvgmError):
    """A CLIME column LP came back infeasible or unbounded."""


class SpecInfeasible(LvgmError):
    """Model parameters cannot produce a member of the uniformity class."""


class IncoherenceUnreachable(LvgmError):
    """No incoherent orthonormal basis found within the retry budget."""

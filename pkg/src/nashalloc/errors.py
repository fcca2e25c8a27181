"""Exception types shared across the package."""


class NashAllocError(Exception):
    """Base class for all package errors."""


# --- network validation ---

class NegativeObligation(NashAllocError):
    def __init__(self, i, j):
        super().__init__(f"obligation entry ({i}, {j}) is negative")
        self.i, self.j = i, j


class ZeroSocietyObligation(NashAllocError):
    def __init__(self, i):
        super().__init__(f"bank {i} has no obligation to society (must be > 0)")
        self.i = i


class NonzeroDiagonal(NashAllocError):
    def __init__(self, i):
        super().__init__(f"bank {i} has a nonzero obligation to itself")
        self.i = i


class ParseError(NashAllocError):
    """Malformed input file (network JSON, scenario CSV, aggregator spec)."""


# --- clearing ---

class NegativeAssets(NashAllocError):
    def __init__(self, i):
        super().__init__(f"asset entry {i} is negative")
        self.i = i


class NonConvergence(NashAllocError):
    """Clearing iteration cap hit; indicates a bug for valid inputs."""


class SingularSystem(NashAllocError):
    """Leontief system not invertible; cannot occur for valid networks."""


# --- scenarios ---

class NotPositiveDefinite(NashAllocError):
    """Correlation matrix is not symmetric positive definite."""


# --- aggregation ---

class OutOfDomain(NashAllocError):
    """Evaluation point falls outside the aggregation domain."""


class EmptyDomain(NashAllocError):
    """No capital vector keeps the shock inside the aggregation domain."""


class DecompositionMismatch(NashAllocError):
    def __init__(self, point, gap):
        super().__init__(
            f"component sum deviates from the aggregate by {gap:.3e} at {point}"
        )
        self.point = point
        self.gap = gap


# --- solvers ---

class NonCoherentRiskMeasure(NashAllocError):
    """Solver entry point requires a coherent risk measure."""


class BracketFailure(NashAllocError):
    """Upper bisection bracket never became acceptable after expansion."""


class MaxIterations(NashAllocError):
    """Fixed-point iteration cap hit; carries the best iterate found."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericalBreakdown(NashAllocError):
    """Simplex pivot fell below the stability threshold."""


class InfeasibleProgram(NashAllocError):
    """LP reported infeasible where feasibility is guaranteed (internal error)."""

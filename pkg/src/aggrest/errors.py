"""Exception types shared across the library."""


class AggrestError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(AggrestError):
    """Vector/matrix dimensions inconsistent with the object they feed."""


class ShapeMismatch(AggrestError):
    """Observation block has the wrong shape for the requested operation."""


class DomainViolation(AggrestError):
    """A parameter point or argument leaves its admissible domain."""


class NonConvergence(AggrestError):
    """An iterative solver hit its cap before reaching tolerance."""


class WrongScheme(AggrestError):
    """Operation requires a different observation scheme family."""


class PowerIterationStall(AggrestError):
    """Power iteration residual plateaued; signals a numerical fault."""


class Infeasible(AggrestError):
    """Semidefinite relaxation data malformed (no strictly feasible scaling)."""


class AllHypothesesEmpty(AggrestError):
    """Every hypothesis in an adaptive problem was pruned as empty."""


class DegeneratePoints(AggrestError):
    """Candidate points collapse to a single point after deduplication."""


class NoFeasibleSample(AggrestError):
    """Rejection sampler found no feasible point; bound defaults to zero."""

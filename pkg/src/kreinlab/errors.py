"""Exception hierarchy shared by every module."""


class KreinlabError(Exception):
    """Base class for all library errors."""


class GridRangeError(KreinlabError, ValueError):
    """An interval or evaluation point lies outside the grid."""


class ShapeError(KreinlabError, ValueError):
    """Arrays or grids do not match."""


class DivergenceError(KreinlabError, ArithmeticError):
    """Non-finite values appeared during integration."""


class NonConvergenceError(KreinlabError, ArithmeticError):
    """A limit did not settle within the requested tolerance."""


class SingularPartError(KreinlabError, ValueError):
    """The Szego function comes too close to zero on the real line."""


class DegenerateInputError(KreinlabError, ValueError):
    """Input with zero norm where a ratio is required."""


class DomainError(KreinlabError, ValueError):
    """Input outside the mathematical domain of an operation."""


class DomainTooSmallError(KreinlabError, ValueError):
    """A propagated packet reached the far wall of the grid."""


class PreconditionError(KreinlabError, ValueError):
    """A stated precondition does not hold."""


class ScenarioError(KreinlabError, ValueError):
    """Scenario validation failed; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))

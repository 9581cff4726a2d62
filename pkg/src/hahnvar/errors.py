"""Exception hierarchy.

``NumericalError`` subclasses signal a numerical failure (non-convergence,
singular coefficients, ...).  Plain ``ValueError`` subclasses signal bad input.
The CLI maps the first family to exit code 3 and the second to exit code 2.
"""


class HahnError(Exception):
    """Base class for all package errors."""


class NumericalError(HahnError):
    """A computation could not be carried out to the requested accuracy."""


class DegenerateSeed(HahnError, ValueError):
    """Both interval endpoints coincide with the fixed point of the jump map."""


class FixedPointInput(HahnError, ValueError):
    """An operation that excludes the fixed point received it."""


class DerivativeAtFixedPointUnavailable(NumericalError):
    """No analytic derivative at the fixed point and the limit did not settle."""


class SeriesNotConverged(NumericalError):
    """A series or product hit ``max_terms`` before its stopping rule fired."""


NonConvergence = SeriesNotConverged


class MissingNeighbor(NumericalError):
    """The jump of a lattice point lies beyond the truncation depth."""


class BothMultipliersZero(HahnError, ValueError):
    pass


class DegenerateSystem(NumericalError):
    pass


class MaxIterations(NumericalError):
    """An iterative solver stalled; ``grad_norm`` holds the last gradient norm."""

    def __init__(self, message, grad_norm=float("nan")):
        super().__init__(message)
        self.grad_norm = grad_norm


class SingularCoefficient(NumericalError):
    pass


class ExponentialZero(NumericalError):
    pass


class DomainError(NumericalError):
    """A function was evaluated outside its domain (e.g. log utility at c <= 0)."""


class UnknownFixture(HahnError, ValueError):
    pass


class ConstraintViolation(HahnError, ValueError):
    pass

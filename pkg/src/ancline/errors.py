"""Exception hierarchy. Every error carries enough context to name the failing quantity."""


class AnclineError(Exception):
    """Base class for all package errors."""


class InvalidParameter(AnclineError, ValueError):
    """A parameter record violates one of its constraints."""


class NumericFailure(AnclineError, ArithmeticError):
    """Base for failures of a numeric routine on otherwise valid input."""


class SingularSystem(NumericFailure):
    pass


class NoConvergence(NumericFailure):
    pass


class QuadratureFailure(NumericFailure):
    pass


class UndefinedConditional(NumericFailure):
    """A conditional rate was requested on an event of probability zero."""


class DegenerateDenominator(NumericFailure):
    pass


class DegenerateBeta(NumericFailure):
    pass


class SigmaZero(NumericFailure):
    """Analytic diffusion derivatives need sigma > 0."""


class TargetUnreachable(NumericFailure):
    pass


class NegativeNeutralRate(InvalidParameter):
    pass


class WindowTooShort(NumericFailure):
    """Too few ancestral mutation events in the observation window."""


class UnknownFigure(InvalidParameter):
    pass


class InvalidOverride(InvalidParameter):
    pass

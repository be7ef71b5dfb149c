"""Exception types shared across the package."""


class TwistregError(Exception):
    """Base class for every error raised by twistreg."""


class InvalidParams(TwistregError, ValueError):
    pass


class InfeasibleLaw(TwistregError):
    """The moment system has a solution but a connector density is not positive."""


class DomainError(TwistregError, ValueError):
    pass


class OutOfDomain(TwistregError, ValueError):
    pass


class InfeasibleState(TwistregError):
    """Some element has a nonpositive Jacobian where a finite energy is required."""


class InfeasibleStart(InfeasibleState):
    pass


class LineSearchStalled(TwistregError):
    pass


class BoundViolated(TwistregError):
    def __init__(self, message, element=None, margin=None):
        super().__init__(message)
        self.element = element
        self.margin = margin


class OriginOnCurve(TwistregError):
    pass


class UnwrapAmbiguous(TwistregError):
    pass


class TooFewRadii(TwistregError):
    pass


class HypothesisViolated(TwistregError):
    pass


class ProfileOrderViolated(TwistregError, ValueError):
    pass

"""Exception hierarchy shared by all modules."""


class MultiscaleError(Exception):
    """Base class for every error raised by this package."""


class ContractError(MultiscaleError, ValueError):
    """Inputs violate a documented precondition (dimensions, lengths, signs)."""


class DomainError(MultiscaleError, ValueError):
    """A parameter lies outside the range where a formula is defined."""


class BoundInapplicableError(DomainError):
    """A bound's hypotheses fail, e.g. a non-positive denominator."""


class DivergenceError(MultiscaleError, ArithmeticError):
    """An integration produced a non-finite state.

    ``state`` is the last finite state reached, ``component`` names the
    offending variable (``"x"`` or ``"y"``) and ``index`` the micro/macro
    step at which it happened when known.
    """

    def __init__(self, message, state=None, component=None, index=None):
        super().__init__(message)
        self.state = state
        self.component = component
        self.index = index


class StepOverflowError(DivergenceError):
    """A single microstep overflowed."""


class AccuracyError(MultiscaleError):
    """A reference integration failed its step-halving self-check."""


class SpecError(MultiscaleError, ValueError):
    """An experiment spec file or preset is malformed."""


class ExperimentError(MultiscaleError):
    """A sweep point of an experiment could not be completed."""

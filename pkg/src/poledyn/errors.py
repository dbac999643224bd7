"""Exception hierarchy shared by every poledyn module."""


class PoledynError(Exception):
    """Base class for all poledyn failures."""


class InvariantViolation(PoledynError, ValueError):
    """A map or policy parameter violates a structural invariant."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class PoleEvaluation(PoledynError, ArithmeticError):
    """The map was evaluated exactly on one of its poles."""

    def __init__(self, pole_index, value=None, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(f"evaluation on pole {pole_index}{where}")
        self.pole_index = pole_index
        self.value = value
        self.step = step


class BracketFailure(PoledynError, RuntimeError):
    """Bracket expansion for a branch preimage did not terminate."""


class PrecisionExhausted(PoledynError, ArithmeticError):
    """The working precision cannot resolve the requested quantity.

    ``partial`` optionally carries whatever was computed before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EpsilonTooLarge(PoledynError, ValueError):
    """Pole neighbourhood radius is too large for the map's geometry."""


class BudgetExceeded(PoledynError, RuntimeError):
    """A computation would produce more intervals than the configured budget."""

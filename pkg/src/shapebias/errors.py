"""Exception types shared across the package."""


class ContractError(ValueError):
    """A caller violated an operation's precondition (shape, range, arity)."""


class NumericError(ArithmeticError):
    """A computation produced or would produce a non-finite value."""


class DecodeError(ValueError):
    """A file or byte payload could not be parsed."""


class TrainingError(RuntimeError):
    """Training diverged; ``step`` records where."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

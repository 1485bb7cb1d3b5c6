"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Input data, parameters or configuration failed validation."""


class UnsupportedOperationError(TypeError):
    """The operation does not apply to this kind of object."""


class ConsistencyError(RuntimeError):
    """An internal numerical invariant was violated."""

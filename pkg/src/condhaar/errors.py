"""Exception types raised by the library."""


class DomainError(ValueError):
    """A parameter lies outside the domain where an operation is defined."""


class DegenerateReflectionError(DomainError):
    """The generating column is too close to the first basis vector."""


class ConditioningError(ValueError):
    """A matrix does not carry the eigenvalues it was conditioned to have."""


class ContractViolation(ValueError):
    """An input breaks a structural contract (e.g. a non-unitary matrix)."""


class SingularityError(ArithmeticError):
    """A factor vanished exactly where a logarithm was requested."""


class InsufficientDataError(ValueError):
    """Too few samples fall in the requested window for a stable estimate."""


class RejectionLimitError(RuntimeError):
    """A rejection sampler exhausted its attempt budget."""

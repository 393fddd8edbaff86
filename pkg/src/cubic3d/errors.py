"""Exception hierarchy shared across the package."""


class Cubic3dError(Exception):
    """Base class for every error raised by cubic3d."""


class InvalidStateError(Cubic3dError, ValueError):
    """A state vector contains NaN or infinity."""


class ParameterError(Cubic3dError, ValueError):
    """A parameter record violates its family's domain constraints."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


class ConfigError(Cubic3dError, ValueError):
    """Configuration input is malformed (unknown key, bad type, bad domain)."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class NoSymmetryError(Cubic3dError):
    """The requested family has no point symmetry for its parameters."""


class IntegrationError(Cubic3dError):
    """Step-size underflow or budget exhaustion; carries the last good state."""

    def __init__(self, message, last_time, last_state, status=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state
        self.status = status


class EscapedError(Cubic3dError):
    """A computation that needs a bounded trajectory saw it escape."""

    def __init__(self, message, time, state):
        super().__init__(message)
        self.time = time
        self.state = state


class StructureMismatchError(Cubic3dError):
    """The equilibrium lacks the invariant manifold that was asked for."""


class NotFoundError(Cubic3dError):
    """A search (orbit, bracket, Hopf point) did not produce a result."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class AmbiguousWindingError(Cubic3dError):
    """Accumulated winding is not close enough to an integer."""

    def __init__(self, message, value):
        super().__init__(message)
        self.value = value


class UndecidedError(Cubic3dError):
    """A sign-based decision saw both signs."""


class NoBracketError(Cubic3dError):
    """Bisection endpoints give the same predicate value."""


class PreconditionError(Cubic3dError, ValueError):
    """An operation was called on input that violates its precondition."""

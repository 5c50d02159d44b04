"""Exception types shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class LibraryFormatError(EngineError):
    """Library or model file is malformed (unparseable / wrong shape)."""


class LibraryValidationError(EngineError):
    """A library entry violates a contract.

    Carries the offending type id and field so callers (and the CLI) can
    point at the exact entry.
    """

    def __init__(self, message: str, type_id: str = "", field: str = ""):
        super().__init__(message)
        self.type_id = type_id
        self.field = field


class DuplicateTypeIdError(LibraryValidationError):
    def __init__(self, type_id: str):
        super().__init__(f"duplicate type id {type_id!r}", type_id=type_id, field="id")


class TypeNotFoundError(EngineError):
    def __init__(self, type_id: str):
        super().__init__(f"no manipulation type with id {type_id!r}")
        self.type_id = type_id


class DofMismatchError(EngineError):
    def __init__(self, expected: int, got: int, what: str = "joint vector"):
        super().__init__(f"{what} has {got} values, hand model expects {expected}")
        self.expected = expected
        self.got = got


class IkConvergenceError(EngineError):
    """IK did not reach tolerance; reports the final residuals."""

    def __init__(self, pos_residual: float, rot_residual: float, iterations: int):
        super().__init__(
            f"IK did not converge after {iterations} iterations "
            f"(residual {pos_residual:.3e} m / {rot_residual:.3e} rad)"
        )
        self.pos_residual = pos_residual
        self.rot_residual = rot_residual
        self.iterations = iterations


class CalibrationError(EngineError):
    """Degenerate or inconsistent stretch/contract calibration."""


class EmptyQueryError(EngineError):
    """Attribute query has no non-empty field."""


class PlanFormatError(EngineError):
    """Model output does not follow the structured plan format."""


class UnknownTypeNameError(EngineError):
    """A plan referenced type names that do not exist in the library."""

    def __init__(self, names: list[str]):
        super().__init__("unknown manipulation type name(s): " + ", ".join(sorted(names)))
        self.names = list(names)


class RetrievalError(EngineError):
    """External retrieval endpoint unreachable, timed out, or misbehaved."""


class DemonstrationFormatError(EngineError):
    """Demonstration file is corrupt, truncated, or version-incompatible."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index


class ProtocolError(EngineError):
    """A wire message failed validation."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field


class IllegalTransitionError(EngineError):
    """A message requested a session mode change the state machine forbids."""

"""Exception types shared across the workbench."""


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class FormulaSyntaxError(WorkbenchError):
    """Malformed formula or transformation text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class SignatureError(WorkbenchError):
    """Bad signature declaration, unknown symbol, or arity mismatch."""


class EqualityNotInSignature(WorkbenchError):
    """An equality atom was used under a without-equality signature."""


class ModeMismatch(WorkbenchError):
    """Algebra species does not match the oracle or signature mode."""


class InfiniteAlgebra(WorkbenchError):
    """An operation that needs a finite algebra was given an infinite one."""


class ZeroElement(WorkbenchError):
    """A construction was seeded at the zero element."""


class DiagonalRequirementUnsatisfiable(WorkbenchError):
    """The theory forces points to collide; no diagonal-free filter exists.

    Raised when -d_ij is inconsistent with the current chain and no
    alternative branch exists (the theory bounds the domain size).
    """

    def __init__(self, i: int, j: int, step: int):
        super().__init__(f"-d_{i}{j} inconsistent with chain at step {step}")
        self.indices = (i, j)
        self.step = step


class OmittingBlocked(WorkbenchError):
    """Every member of a tracked type is forced by the chain: the type is
    principal over the current element and cannot be omitted."""

    def __init__(self, type_name: str, tau):
        super().__init__(f"type {type_name!r} blocked at transformation {tau}")
        self.type_name = type_name
        self.tau = tau


class HorizonExceeded(WorkbenchError):
    """A query stepped outside the materialized horizon of a bounded object."""


class UnfrozenFilter(WorkbenchError):
    """Representation maps require the filter's schedule to have completed."""


class OracleProtocolError(WorkbenchError):
    """External oracle subprocess spoke garbage or died."""

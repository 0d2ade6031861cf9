"""Domain error taxonomy shared across the orchestrator.

Every error carries a human-readable message; some name the offending
field or resource class so API clients can surface field-level problems.
The HTTP gateway maps these onto status codes without renaming them.
"""


class DomainError(Exception):
    """Base class for all orchestrator errors."""


class ParseError(DomainError):
    """A configuration document could not be parsed."""


class ValidationError(DomainError):
    """A domain invariant is violated; names the offending field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SpecError(DomainError):
    """A resource request is malformed; names the offending field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class LicenseError(DomainError):
    """An over-the-air channel falls outside every licensed band."""


class CapacityError(DomainError):
    """A request exceeds total pool capacity regardless of time."""


class StateError(DomainError):
    """An operation was applied in an illegal lifecycle state."""


class NotFoundError(StateError):
    """A referenced reservation or experiment id does not exist."""


class AllocationError(DomainError):
    """Binding failed; names the exhausted resource class."""

    def __init__(self, resource_class, message=""):
        self.resource_class = resource_class
        super().__init__(message or f"cannot allocate: {resource_class}")


class NoFitError(DomainError):
    """No contiguous spectrum remains in a block for the requested slot."""


class PlacementError(DomainError):
    """The placement heuristic found no feasible task assignment."""


class ShiftError(DomainError):
    """A frequency shift at or beyond Nyquist would alias."""


class RateError(DomainError):
    """Sample-rate mismatch between buffers or against a slot."""


class SlotError(DomainError):
    """A slot does not belong to the referenced spectrum block."""


class ZeroReferenceError(DomainError):
    """EVM requested against an all-zero reference."""


class ScenarioError(DomainError):
    """A channel scenario is unusable (e.g. no radios)."""


class SealedError(DomainError):
    """Write attempted on a sealed experiment archive."""


class OrderError(DomainError):
    """Record timestamp regressed for a node within an archive."""


class BindError(DomainError):
    """The service could not bind its listen address."""


class RecoveryError(DomainError):
    """The persisted event log is corrupt; names the byte offset."""

    def __init__(self, offset, message=""):
        self.offset = offset
        super().__init__(message or f"corrupt event log at byte offset {offset}")


class ConflictError(DomainError):
    """A reservation cannot coexist with the admitted calendar."""

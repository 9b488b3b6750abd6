"""Exception hierarchy for cdo-store.

Every reported error case of a store operation raises a subclass of
:class:`CdoError`; the CLI maps these to exit code 1 (or 3 for
verification failures).
"""

from __future__ import annotations


class CdoError(Exception):
    """Base class for all domain errors."""


class VerificationError(CdoError):
    """Base class for integrity failures (CLI exit code 3)."""


class InvalidId(CdoError, ValueError):
    pass


class DuplicateId(CdoError):
    pass


class UnknownEntity(CdoError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else "unknown entity"


class WrongDomain(CdoError):
    pass


class SameDomainPair(CdoError):
    pass


class EntityInUse(CdoError):
    pass


class InvalidValue(CdoError, ValueError):
    """An attribute, label, or payload value outside the allowed scalar kinds."""


# mapping
class CycleDetected(CdoError):
    pass


class DuplicateEdge(CdoError):
    pass


class NoMatch(CdoError):
    pass


class MissingAnchor(CdoError):
    pass


class AnchorExists(CdoError):
    pass


class DuplicateMapping(CdoError):
    pass


class MappingKindConflict(CdoError):
    pass


class NotMapped(CdoError):
    pass


# event log
class ClockRegression(CdoError):
    pass


class UnknownActor(CdoError):
    pass


class CorruptLog(VerificationError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# access control
class Unauthorized(CdoError):
    def __init__(self, decision, operation: str = ""):
        self.decision = decision
        self.operation = operation
        super().__init__(f"{operation or 'operation'} denied: {decision.reason}")


class DuplicateRole(CdoError):
    pass


class UnknownRole(CdoError):
    pass


class DuplicateActor(CdoError):
    pass


# query
class UnboundedQuery(CdoError):
    pass


class DuplicateName(CdoError):
    pass


# consent / provenance
class EmptyScope(CdoError):
    pass


class UnknownReceipt(CdoError):
    pass


class AlreadyRevoked(CdoError):
    pass


class NeverExisted(CdoError):
    pass


# io
class ParseError(CdoError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DomainConflict(CdoError):
    pass


class ImportConflict(CdoError):
    pass


class CorruptSnapshot(VerificationError):
    pass


class StoreIOError(CdoError, OSError):
    pass


__all__ = [
    "AlreadyRevoked",
    "AnchorExists",
    "CdoError",
    "ClockRegression",
    "CorruptLog",
    "CorruptSnapshot",
    "CycleDetected",
    "DomainConflict",
    "DuplicateActor",
    "DuplicateEdge",
    "DuplicateId",
    "DuplicateMapping",
    "DuplicateName",
    "DuplicateRole",
    "EmptyScope",
    "EntityInUse",
    "ImportConflict",
    "InvalidId",
    "InvalidValue",
    "MappingKindConflict",
    "MissingAnchor",
    "NeverExisted",
    "NoMatch",
    "NotMapped",
    "ParseError",
    "SameDomainPair",
    "StoreIOError",
    "Unauthorized",
    "UnboundedQuery",
    "UnknownActor",
    "UnknownEntity",
    "UnknownReceipt",
    "UnknownRole",
    "VerificationError",
    "WrongDomain",
]

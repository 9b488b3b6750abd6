"""Consent receipts, provenance chains and point-in-time audit reports."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .access import Decision
from .canonical import format_instant, parse_instant
from .errors import InvalidValue, NeverExisted
from .eventlog import EventRecord, Keyring, VerificationReport, verify_chain
from .model import Domain, Entity, EntityId, validate_key

if TYPE_CHECKING:
    from .state import View

RECEIPT_NAMESPACE = "rcpt"
DENY_ACTION = "cdo:deny"

# reserved attribute keys carried by receipt entities
ATTR_SUBJECT = "cdo.consent.subject"
ATTR_PURPOSE = "cdo.consent.purpose"
ATTR_SCOPE = "cdo.consent.scope"
ATTR_STATUS = "cdo.consent.status"
ATTR_GRANTED_AT = "cdo.consent.granted_at"
ATTR_REVOKED_AT = "cdo.consent.revoked_at"


class ConsentStatus(str, Enum):
    GRANTED = "granted"
    REVOKED = "revoked"


@dataclass(frozen=True)
class ConsentReceipt:
    receipt_id: EntityId
    subject: str
    purpose: str
    scope: frozenset[EntityId]
    status: ConsentStatus
    granted_at: datetime
    revoked_at: Optional[datetime] = None

    def __post_init__(self) -> None:
        validate_key(self.subject, "data subject")
        validate_key(self.purpose, "purpose")
        object.__setattr__(self, "scope", frozenset(self.scope))
        if (self.status is ConsentStatus.REVOKED) != (self.revoked_at is not None):
            raise InvalidValue("revoked_at must be present exactly when status is revoked")
        if self.revoked_at is not None and self.revoked_at < self.granted_at:
            raise InvalidValue("revoked_at precedes granted_at")

    def covers(self, entity: EntityId, purpose: str, at: datetime) -> bool:
        return (
            entity in self.scope
            and purpose == self.purpose
            and self.granted_at <= at
            and (self.revoked_at is None or self.revoked_at > at)
        )

    def sorted_scope(self) -> list[EntityId]:
        return sorted(self.scope, key=EntityId.render)

    def as_entity(self) -> Entity:
        """Object-domain projection so receipts are reachable by queries."""
        attrs: dict[str, object] = {
            ATTR_SUBJECT: self.subject,
            ATTR_PURPOSE: self.purpose,
            ATTR_SCOPE: " ".join(e.render() for e in self.sorted_scope()),
            ATTR_STATUS: self.status.value,
            ATTR_GRANTED_AT: self.granted_at,
        }
        if self.revoked_at is not None:
            attrs[ATTR_REVOKED_AT] = self.revoked_at
        return Entity(self.receipt_id, Domain.OBJECT, {}, attrs)

    def to_json(self) -> dict[str, object]:
        return {
            "receipt_id": self.receipt_id.render(),
            "subject": self.subject,
            "purpose": self.purpose,
            "scope": [e.render() for e in self.sorted_scope()],
            "status": self.status.value,
            "granted_at": format_instant(self.granted_at),
            "revoked_at": format_instant(self.revoked_at) if self.revoked_at else None,
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, object]) -> ConsentReceipt:
        revoked = doc.get("revoked_at")
        return cls(
            EntityId.parse(doc["receipt_id"]),
            str(doc["subject"]),
            str(doc["purpose"]),
            frozenset(EntityId.parse(e) for e in doc["scope"]),
            ConsentStatus(doc["status"]),
            parse_instant(doc["granted_at"]),
            parse_instant(revoked) if revoked else None,
        )


def check_usage_allowed(
    receipts: Iterable[ConsentReceipt], entity: EntityId, purpose: str, at: datetime
) -> Decision:
    for receipt in sorted(receipts, key=lambda r: r.receipt_id.render()):
        if receipt.covers(entity, purpose, at):
            return Decision(True, f"receipt {receipt.receipt_id}")
    return Decision(False, "no-consent")


# -- provenance -------------------------------------------------------------

@dataclass(frozen=True)
class ProvenanceLink:
    seq: int
    record_hash: str
    actor: str
    action: str
    previous_state: str
    final_state: str
    timestamp: str

    def to_json(self) -> dict[str, object]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ProvenanceChain:
    subject: EntityId
    links: tuple[ProvenanceLink, ...]
    verification: VerificationReport

    def __len__(self) -> int:
        return len(self.links)

    def to_json(self) -> dict[str, object]:
        return {
            "subject": self.subject.render(),
            "links": [link.to_json() for link in self.links],
            "verification": self.verification.to_json(),
        }


def _lineage_links(records: Sequence[EventRecord], subject: EntityId) -> tuple[ProvenanceLink, ...]:
    rendered = subject.render()
    hits = [r for r in records if r.subject == rendered and r.action != DENY_ACTION]
    hits.sort(key=lambda r: (r.timestamp, r.seq))
    return tuple(
        ProvenanceLink(
            r.seq, r.record_hash, r.actor, r.action, r.previous_state, r.final_state, r.timestamp
        )
        for r in hits
    )


def lineage(records: Sequence[EventRecord], subject: EntityId, keyring: Keyring) -> ProvenanceChain:
    """Every logged transformation of ``subject``, oldest first.

    Works from the records alone, so deleted entities stay traceable.
    Denial records are not transformations and are left out.
    """
    links = _lineage_links(records, subject)
    if not links:
        raise NeverExisted(f"no log record references {subject}")
    return ProvenanceChain(subject, links, verify_chain(records, keyring))


# -- audit ------------------------------------------------------------------

@dataclass(frozen=True)
class AuditEntry:
    entity: EntityId
    exists: bool
    consent: Decision
    lineage_length: int
    first_seq: Optional[int]
    last_seq: Optional[int]
    post_revocation_events: tuple[int, ...] = ()

    @property
    def flagged(self) -> bool:
        return not self.consent.allowed

    def to_json(self) -> dict[str, object]:
        return {
            "entity": self.entity.render(),
            "exists": self.exists,
            "consent": {"allowed": self.consent.allowed, "reason": self.consent.reason},
            "lineage": {
                "length": self.lineage_length,
                "first_seq": self.first_seq,
                "last_seq": self.last_seq,
            },
            "post_revocation_events": list(self.post_revocation_events),
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class AuditReport:
    scope: tuple[EntityId, ...]
    purpose: str
    at: datetime
    entries: tuple[AuditEntry, ...]
    chain: VerificationReport
    compliant: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "compliant",
            self.chain.valid and all(e.consent.allowed for e in self.entries),
        )

    def flagged(self) -> list[EntityId]:
        return [e.entity for e in self.entries if e.flagged]

    def to_json(self) -> dict[str, object]:
        return {
            "scope": [e.render() for e in self.scope],
            "purpose": self.purpose,
            "at": format_instant(self.at),
            "entities": [e.to_json() for e in self.entries],
            "chain": self.chain.to_json(),
            "compliant": self.compliant,
        }


def audit_report(
    view: View, keyring: Keyring, scope: Iterable[EntityId], purpose: str, at: datetime
) -> AuditReport:
    """Point-in-time compliance of ``scope`` for ``purpose``.  Pure read."""
    records = view.records
    receipts = list(view.state.consents.values())
    scope = tuple(sorted(set(scope), key=EntityId.render))
    entries = []
    for entity in scope:
        exists = view.entity(entity) is not None
        if exists:
            decision = check_usage_allowed(receipts, entity, purpose, at)
        else:
            decision = Decision(False, "unknown-entity")
        links = _lineage_links(records, entity)
        revocations = [
            r.revoked_at
            for r in receipts
            if r.revoked_at is not None and entity in r.scope and r.purpose == purpose
        ]
        late: tuple[int, ...] = ()
        if revocations:
            cutoff = format_instant(min(revocations))
            late = tuple(link.seq for link in links if link.timestamp > cutoff)
        entries.append(
            AuditEntry(
                entity,
                exists,
                decision,
                len(links),
                links[0].seq if links else None,
                links[-1].seq if links else None,
                late,
            )
        )
    return AuditReport(scope, purpose, at, tuple(entries), verify_chain(records, keyring))

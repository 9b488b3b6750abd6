"""Append-only, hash-chained, actor-authenticated event log.

Record hash layout (see :mod:`cdo_store.canonical` for token encoding)::

    "event" US seq US event_entity US actor US action US subject
            US previous_state US final_state US timestamp US payload
            US prev_hash RS

``seq`` is an ``i`` token, ``payload`` an ``m`` token, every other field an
``s`` token holding the stored text.  ``record_hash`` is the SHA-256 of
those bytes in lowercase hex; ``auth_tag`` is HMAC-SHA-256 under the
actor's key over the 32 raw bytes of ``record_hash``.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Optional, Protocol

from .canonical import ZERO_DIGEST, digest, encode_record, format_instant, parse_instant
from .errors import ClockRegression, InvalidValue, ParseError, UnknownActor

RECORD_FIELDS = (
    "seq",
    "event_entity",
    "actor",
    "action",
    "subject",
    "previous_state",
    "final_state",
    "timestamp",
    "payload",
    "prev_hash",
    "record_hash",
    "auth_tag",
)
EVENT_NAMESPACE = "evt"


def event_entity_for(seq: int) -> str:
    return f"{EVENT_NAMESPACE}:{seq}"


# -- signing ----------------------------------------------------------------

class Signer(Protocol):
    def tag(self, key: bytes, message: bytes) -> bytes: ...

    def verify(self, key: bytes, message: bytes, tag: bytes) -> bool: ...


class HmacSha256Signer:
    def tag(self, key: bytes, message: bytes) -> bytes:
        return hmac.new(key, message, hashlib.sha256).digest()

    def verify(self, key: bytes, message: bytes, tag: bytes) -> bool:
        return hmac.compare_digest(self.tag(key, message), tag)


DEFAULT_SIGNER = HmacSha256Signer()


class Keyring:
    """Actor id -> secret key bytes.  Keys never enter the log."""

    def __init__(self, keys: Mapping[str, bytes] | None = None):
        self._keys: dict[str, bytes] = dict(keys or {})

    @staticmethod
    def new_key() -> bytes:
        return secrets.token_bytes(32)

    def add(self, actor_id: str, key: bytes | None = None) -> bytes:
        key = key if key is not None else self.new_key()
        self._keys[actor_id] = bytes(key)
        return self._keys[actor_id]

    def get(self, actor_id: str) -> bytes:
        try:
            return self._keys[actor_id]
        except KeyError:
            raise UnknownActor(f"no key registered for actor {actor_id!r}") from None

    def __contains__(self, actor_id: object) -> bool:
        return actor_id in self._keys

    def copy(self) -> Keyring:
        return Keyring(self._keys)

    def to_json(self) -> dict[str, str]:
        return {k: v.hex() for k, v in sorted(self._keys.items())}

    @classmethod
    def from_json(cls, doc: Mapping[str, str]) -> Keyring:
        return cls({k: bytes.fromhex(v) for k, v in doc.items()})


# -- clocks -----------------------------------------------------------------

Clock = Callable[[], datetime]


class StepClock:
    """Deterministic clock: ``start``, ``start + step``, ..."""

    def __init__(self, start: datetime, step: timedelta = timedelta(seconds=1)):
        self._next = start.astimezone(timezone.utc)
        self._step = step

    def __call__(self) -> datetime:
        now = self._next
        self._next = now + self._step
        return now


class SystemClock:
    def __call__(self) -> datetime:
        return datetime.now(timezone.utc)


# -- records ----------------------------------------------------------------

def record_hash_input(
    seq: int,
    event_entity: str,
    actor: str,
    action: str,
    subject: str,
    previous_state: str,
    final_state: str,
    timestamp: str,
    payload: Mapping[str, object],
    prev_hash: str,
) -> bytes:
    return encode_record(
        "event", seq, event_entity, actor, action, subject,
        previous_state, final_state, timestamp, payload, prev_hash,
    )


@dataclass(frozen=True)
class EventRecord:
    seq: int
    event_entity: str
    actor: str
    action: str
    subject: str
    previous_state: str
    final_state: str
    timestamp: str
    payload: Mapping[str, object]
    prev_hash: str
    record_hash: str
    auth_tag: str

    @cached_property
    def computed_hash(self) -> str:
        """SHA-256 recomputed from the stored fields (records are immutable)."""
        return digest(
            record_hash_input(
                self.seq, self.event_entity, self.actor, self.action, self.subject,
                self.previous_state, self.final_state, self.timestamp, self.payload,
                self.prev_hash,
            )
        )

    @property
    def instant(self) -> datetime:
        return parse_instant(self.timestamp)

    def to_json(self) -> dict[str, object]:
        return {name: getattr(self, name) for name in RECORD_FIELDS}

    def to_line(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, separators=(",", ":"))


def _hash_ok(record: EventRecord) -> bool:
    try:
        return hmac.compare_digest(record.computed_hash, record.record_hash)
    except (InvalidValue, TypeError):
        return False


def record_from_json(doc: object) -> EventRecord:
    if not isinstance(doc, dict) or set(doc) != set(RECORD_FIELDS):
        raise ParseError("event record must have exactly the documented fields")
    if type(doc["seq"]) is not int:
        raise ParseError("seq must be an integer")
    for name in RECORD_FIELDS:
        if name not in ("seq", "payload") and not isinstance(doc[name], str):
            raise ParseError(f"{name} must be a string")
    if not isinstance(doc["payload"], dict):
        raise ParseError("payload must be an object")
    return EventRecord(**{name: doc[name] for name in RECORD_FIELDS})


def record_from_line(line: str | bytes) -> EventRecord:
    try:
        doc = json.loads(line)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed event record: {exc}") from None
    return record_from_json(doc)


def verify_authenticity(
    record: EventRecord, actor_key: bytes | Keyring, signer: Signer = DEFAULT_SIGNER
) -> bool:
    """True iff ``auth_tag`` is the keyed tag of ``record_hash``.

    With a :class:`Keyring`, an actor without a key raises UnknownActor.
    """
    key = actor_key.get(record.actor) if isinstance(actor_key, Keyring) else actor_key
    try:
        message = bytes.fromhex(record.record_hash)
        tag = bytes.fromhex(record.auth_tag)
    except ValueError:
        return False
    # only the canonical lowercase rendering counts; "AB" must not pass for "ab"
    if len(message) != 32 or tag.hex() != record.auth_tag:
        return False
    return signer.verify(key, message, tag)


# -- verification -----------------------------------------------------------

class FailureKind(str, Enum):
    HASH_MISMATCH = "HashMismatch"
    CHAIN_BREAK = "ChainBreak"
    AUTH_FAILURE = "AuthFailure"
    SEQ_GAP = "SeqGap"


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    first_bad_seq: Optional[int] = None
    failure_kind: Optional[FailureKind] = None

    def __post_init__(self) -> None:
        if self.valid != (self.first_bad_seq is None and self.failure_kind is None):
            raise ValueError("valid must be true exactly when no failure is recorded")

    @classmethod
    def ok(cls) -> VerificationReport:
        return cls(True)

    @classmethod
    def failed(cls, seq: int, kind: FailureKind) -> VerificationReport:
        return cls(False, seq, kind)

    def to_json(self) -> dict[str, object]:
        return {
            "valid": self.valid,
            "first_bad_seq": self.first_bad_seq,
            "failure_kind": self.failure_kind.value if self.failure_kind else None,
        }


def verify_chain(
    records: Sequence[EventRecord],
    keyring: Keyring,
    signer: Signer = DEFAULT_SIGNER,
) -> VerificationReport:
    """Check seq contiguity, hash links, record hashes and auth tags.

    Stops at the first bad record.  Failures are reported, never raised.
    """
    prev = ZERO_DIGEST
    for index, record in enumerate(records):
        if record.seq != index:
            return VerificationReport.failed(index, FailureKind.SEQ_GAP)
        if record.prev_hash != prev:
            return VerificationReport.failed(index, FailureKind.CHAIN_BREAK)
        if not _hash_ok(record):
            return VerificationReport.failed(index, FailureKind.HASH_MISMATCH)
        if record.actor not in keyring or not verify_authenticity(
            record, keyring.get(record.actor), signer
        ):
            return VerificationReport.failed(index, FailureKind.AUTH_FAILURE)
        prev = record.record_hash
    return VerificationReport.ok()


def verify_lines(
    lines: Iterable[str | bytes], keyring: Keyring, signer: Signer = DEFAULT_SIGNER
) -> VerificationReport:
    """Verify raw log lines; an unparseable line counts as a hash mismatch."""
    records = []
    for index, line in enumerate(lines):
        try:
            records.append(record_from_line(line))
        except ParseError:
            report = verify_chain(records, keyring, signer)
            return report if not report.valid else VerificationReport.failed(
                index, FailureKind.HASH_MISMATCH
            )
    return verify_chain(records, keyring, signer)


# -- the log ----------------------------------------------------------------

class EventLog:
    """In-memory append-only sequence of :class:`EventRecord`.

    There is deliberately no way to replace or remove a record.
    """

    def __init__(self, records: Iterable[EventRecord] = ()):
        self._records: list[EventRecord] = list(records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self._records)

    def __getitem__(self, index: int) -> EventRecord:
        return self._records[index]

    @property
    def records(self) -> tuple[EventRecord, ...]:
        return tuple(self._records)

    @property
    def tail_hash(self) -> str:
        return self._records[-1].record_hash if self._records else ZERO_DIGEST

    @property
    def last_instant(self) -> datetime | None:
        return self._records[-1].instant if self._records else None

    def append(
        self,
        *,
        actor: str,
        action: str,
        subject: str,
        previous_state: str,
        final_state: str,
        timestamp: datetime,
        payload: Mapping[str, object],
        key: bytes,
        signer: Signer = DEFAULT_SIGNER,
    ) -> EventRecord:
        record = self.build(
            actor=actor, action=action, subject=subject, previous_state=previous_state,
            final_state=final_state, timestamp=timestamp, payload=payload, key=key, signer=signer,
        )
        self._records.append(record)
        return record

    def build(
        self,
        *,
        actor: str,
        action: str,
        subject: str,
        previous_state: str,
        final_state: str,
        timestamp: datetime,
        payload: Mapping[str, object],
        key: bytes,
        signer: Signer = DEFAULT_SIGNER,
    ) -> EventRecord:
        """Construct (but do not append) the next record."""
        self.check_timestamp(timestamp)
        seq = len(self._records)
        stamp = format_instant(timestamp)
        prev_hash = self.tail_hash
        fields = dict(
            seq=seq,
            event_entity=event_entity_for(seq),
            actor=actor,
            action=action,
            subject=subject,
            previous_state=previous_state,
            final_state=final_state,
            timestamp=stamp,
            payload=payload,
            prev_hash=prev_hash,
        )
        record_hash = digest(record_hash_input(**fields))
        auth_tag = signer.tag(key, bytes.fromhex(record_hash)).hex()
        return EventRecord(**fields, record_hash=record_hash, auth_tag=auth_tag)

    def check_timestamp(self, timestamp: datetime) -> None:
        last = self.last_instant
        # compare at stored (microsecond) precision
        if last is not None and parse_instant(format_instant(timestamp)) < last:
            raise ClockRegression(
                f"timestamp {format_instant(timestamp)} precedes last record "
                f"{format_instant(last)}"
            )


def write_log(path: str | Path, records: Iterable[EventRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.to_line())
            fh.write("\n")


def read_log(path: str | Path) -> list[EventRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_line(line))
            except ParseError as exc:
                raise ParseError(str(exc), line=lineno) from None
    return records


__all__ = [
    "DEFAULT_SIGNER",
    "EVENT_NAMESPACE",
    "RECORD_FIELDS",
    "Clock",
    "EventLog",
    "EventRecord",
    "FailureKind",
    "HmacSha256Signer",
    "Keyring",
    "Signer",
    "StepClock",
    "SystemClock",
    "VerificationReport",
    "event_entity_for",
    "read_log",
    "record_from_json",
    "record_from_line",
    "record_hash_input",
    "verify_authenticity",
    "verify_chain",
    "verify_lines",
    "write_log",
]

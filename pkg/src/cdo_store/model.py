"""Quadrimodal entity model and the six functional correlations."""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from enum import Enum
from typing import Union

from .canonical import encode_record, normalize_instant
from .errors import InvalidId, InvalidValue, SameDomainPair

Scalar = Union[str, int, Decimal, bool, datetime]

_NAMESPACE_RE = re.compile(r"(?:[A-Za-z][A-Za-z0-9_.-]*)?")
_FORBIDDEN_LOCAL = frozenset(':<>"')
_LANG_RE = re.compile(r"[A-Za-z]{1,8}(?:-[A-Za-z0-9]{1,8})*")

# Namespaces the store assigns itself; user entities may not use them.
RESERVED_NAMESPACES = frozenset({"cdo", "evt", "rcpt", "cor", "map", "role", "actor"})


@dataclass(frozen=True)
class EntityId:
    namespace: str
    local_name: str

    def __post_init__(self) -> None:
        if not isinstance(self.namespace, str) or not _NAMESPACE_RE.fullmatch(self.namespace):
            raise InvalidId(f"bad namespace {self.namespace!r}")
        if not is_valid_local_name(self.local_name):
            raise InvalidId(f"bad local name {self.local_name!r}")

    @classmethod
    def parse(cls, text: str) -> EntityId:
        if isinstance(text, EntityId):
            return text
        if not isinstance(text, str) or ":" not in text:
            raise InvalidId(f"not a CURIE: {text!r}")
        namespace, _, local = text.partition(":")
        return cls(namespace, local)

    def render(self) -> str:
        return f"{self.namespace}:{self.local_name}"

    @property
    def reserved(self) -> bool:
        return self.namespace in RESERVED_NAMESPACES

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"EntityId({self.render()!r})"


def is_valid_local_name(name: object) -> bool:
    return (
        isinstance(name, str)
        and name != ""
        and name.isprintable()
        and not any(c.isspace() or c in _FORBIDDEN_LOCAL for c in name)
    )


def eid(text: str | EntityId) -> EntityId:
    """Shorthand for :meth:`EntityId.parse`."""
    return EntityId.parse(text)


class Domain(str, Enum):
    OBJECT = "Object"
    EVENT = "Event"
    CONCEPT = "Concept"
    ACTION = "Action"

    @classmethod
    def parse(cls, text: str | Domain) -> Domain:
        if isinstance(text, Domain):
            return text
        for member in cls:
            if member.value.lower() == str(text).lower():
                return member
        raise InvalidValue(f"unknown domain {text!r}")

    @property
    def rank(self) -> int:
        return DOMAIN_ORDER.index(self)


# Fixed endpoint order for normalized correlation storage.
DOMAIN_ORDER = (Domain.OBJECT, Domain.EVENT, Domain.CONCEPT, Domain.ACTION)


class CorrelationKind(str, Enum):
    SCHEME = "Scheme"
    REASON = "Reason"
    CAUSE = "Cause"
    METHOD = "Method"
    GOAL = "Goal"
    EFFECT = "Effect"

    @classmethod
    def parse(cls, text: str | CorrelationKind) -> CorrelationKind:
        if isinstance(text, CorrelationKind):
            return text
        for member in cls:
            if member.value.lower() == str(text).lower():
                return member
        raise InvalidValue(f"unknown correlation kind {text!r}")


CORRELATION_TABLE: Mapping[frozenset[Domain], CorrelationKind] = {
    frozenset({Domain.OBJECT, Domain.CONCEPT}): CorrelationKind.SCHEME,
    frozenset({Domain.ACTION, Domain.EVENT}): CorrelationKind.REASON,
    frozenset({Domain.ACTION, Domain.OBJECT}): CorrelationKind.CAUSE,
    frozenset({Domain.ACTION, Domain.CONCEPT}): CorrelationKind.METHOD,
    frozenset({Domain.CONCEPT, Domain.EVENT}): CorrelationKind.GOAL,
    frozenset({Domain.OBJECT, Domain.EVENT}): CorrelationKind.EFFECT,
}

KIND_DOMAINS: Mapping[CorrelationKind, frozenset[Domain]] = {
    kind: pair for pair, kind in CORRELATION_TABLE.items()
}


def correlation_kind_for(d1: Domain, d2: Domain) -> CorrelationKind:
    if d1 == d2:
        raise SameDomainPair(f"{d1.value}+{d2.value} is not a functional correlation")
    return CORRELATION_TABLE[frozenset((d1, d2))]


class CrossDomainClass(str, Enum):
    CONSENSUAL_SCHEME = "ConsensualScheme"
    SOVEREIGN_REASON = "SovereignReason"
    NONE = "None"


def classify_cross_domain(correlation: Correlation) -> CrossDomainClass:
    if correlation.kind is CorrelationKind.SCHEME:
        return CrossDomainClass.CONSENSUAL_SCHEME
    if correlation.kind is CorrelationKind.REASON:
        return CrossDomainClass.SOVEREIGN_REASON
    return CrossDomainClass.NONE


def validate_scalar(value: object) -> Scalar:
    if isinstance(value, bool) or isinstance(value, (int, str)):
        if isinstance(value, str) and ("\x1e" in value or "\x1f" in value):
            raise InvalidValue(f"string contains a separator byte: {value!r}")
        return value
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise InvalidValue(f"non-finite decimal {value!r}")
        return value
    if isinstance(value, datetime):
        return normalize_instant(value)
    raise InvalidValue(
        f"attribute values must be str, int, Decimal, bool or datetime; got {type(value).__name__}"
    )


def validate_key(key: object, what: str = "attribute key") -> str:
    if not isinstance(key, str) or not key or not key.isprintable() or any(c.isspace() for c in key):
        raise InvalidValue(f"bad {what} {key!r}")
    return key


def validate_attributes(attrs: Mapping[str, object] | None) -> dict[str, Scalar]:
    if not attrs:
        return {}
    return {validate_key(k): validate_scalar(v) for k, v in attrs.items()}


def validate_labels(labels: Mapping[str, str] | None) -> dict[str, str]:
    if not labels:
        return {}
    out: dict[str, str] = {}
    for tag, text in labels.items():
        if not isinstance(tag, str) or not _LANG_RE.fullmatch(tag):
            raise InvalidValue(f"bad language tag {tag!r}")
        if not isinstance(text, str):
            raise InvalidValue(f"label for {tag!r} must be a string")
        validate_scalar(text)
        out[tag] = text
    return out


@dataclass(frozen=True)
class Entity:
    id: EntityId
    domain: Domain
    labels: Mapping[str, str] = field(default_factory=dict)
    attributes: Mapping[str, Scalar] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", validate_labels(self.labels))
        object.__setattr__(self, "attributes", validate_attributes(self.attributes))

    def canonical(self) -> bytes:
        return encode_record(
            "entity", self.id, self.domain.value, dict(self.labels), dict(self.attributes)
        )


@dataclass(frozen=True)
class Correlation:
    id: EntityId
    kind: CorrelationKind
    a: EntityId
    b: EntityId
    attributes: Mapping[str, Scalar] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise SameDomainPair("a correlation needs two distinct endpoints")
        object.__setattr__(self, "attributes", validate_attributes(self.attributes))

    @classmethod
    def between(
        cls,
        corr_id: EntityId,
        first: Entity,
        second: Entity,
        attributes: Mapping[str, object] | None = None,
    ) -> Correlation:
        """Build a correlation with the kind derived and endpoints normalized."""
        kind = correlation_kind_for(first.domain, second.domain)
        if second.domain.rank < first.domain.rank:
            first, second = second, first
        return cls(corr_id, kind, first.id, second.id, attributes or {})

    def endpoints(self) -> tuple[EntityId, EntityId]:
        return self.a, self.b

    def other(self, node: EntityId) -> EntityId:
        return self.b if node == self.a else self.a

    def canonical(self) -> bytes:
        return encode_record(
            "correlation", self.id, self.kind.value, self.a, self.b, dict(self.attributes)
        )

"""Role-based, per-domain access decisions (default deny)."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import Enum

from .canonical import encode_record
from .errors import InvalidValue
from .model import Domain, is_valid_local_name


class OpClass(str, Enum):
    READ = "read"
    WRITE = "write"
    APPEND = "append"

    @classmethod
    def parse(cls, text: str | OpClass) -> OpClass:
        if isinstance(text, OpClass):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise InvalidValue(f"unknown op class {text!r}") from None


@dataclass(frozen=True)
class Permission:
    domain: Domain
    op_class: OpClass

    def __post_init__(self) -> None:
        # appends only ever target the event log
        if self.op_class is OpClass.APPEND and self.domain is not Domain.EVENT:
            raise InvalidValue(f"append is only meaningful for Event, not {self.domain.value}")

    def to_json(self) -> dict[str, str]:
        return {"domain": self.domain.value, "op": self.op_class.value}

    @classmethod
    def from_json(cls, doc: Mapping[str, str]) -> Permission:
        return cls(Domain.parse(doc["domain"]), OpClass.parse(doc["op"]))

    @classmethod
    def parse(cls, text: str) -> Permission:
        """``Event:append`` style."""
        domain, sep, op = text.partition(":")
        if not sep:
            raise InvalidValue(f"expected DOMAIN:OP, got {text!r}")
        return cls(Domain.parse(domain), OpClass.parse(op))

    def sort_key(self) -> tuple[int, str]:
        return (self.domain.rank, self.op_class.value)


def _local_name(name: object, what: str) -> str:
    if not is_valid_local_name(name):
        raise InvalidValue(f"bad {what} {name!r}")
    return name


@dataclass(frozen=True)
class Role:
    name: str
    grants: frozenset[Permission] = frozenset()

    def __post_init__(self) -> None:
        _local_name(self.name, "role name")
        object.__setattr__(self, "grants", frozenset(self.grants))

    def sorted_grants(self) -> list[Permission]:
        return sorted(self.grants, key=Permission.sort_key)

    def to_json(self) -> dict[str, object]:
        return {"name": self.name, "grants": [g.to_json() for g in self.sorted_grants()]}

    @classmethod
    def from_json(cls, doc: Mapping[str, object]) -> Role:
        return cls(str(doc["name"]), frozenset(Permission.from_json(g) for g in doc.get("grants", [])))

    def canonical(self) -> bytes:
        return encode_record("role", self.name, [g.to_json() for g in self.sorted_grants()])


@dataclass(frozen=True)
class Actor:
    actor_id: str
    roles: frozenset[str] = frozenset()
    key: str = ""  # keyring reference; defaults to actor_id

    def __post_init__(self) -> None:
        _local_name(self.actor_id, "actor id")
        object.__setattr__(self, "roles", frozenset(self.roles))
        if not self.key:
            object.__setattr__(self, "key", self.actor_id)

    def to_json(self) -> dict[str, object]:
        return {"id": self.actor_id, "roles": sorted(self.roles)}

    def canonical(self) -> bytes:
        return encode_record("actor", self.actor_id, sorted(self.roles), self.key)


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str

    def __bool__(self) -> bool:
        return self.allowed


DEFAULT_DENY = "default-deny"

EVENT_NOTARY = Role(
    "event-notary",
    frozenset({Permission(Domain.EVENT, OpClass.APPEND), Permission(Domain.EVENT, OpClass.READ)}),
)
ACTION_TRACKER = Role(
    "action-tracker",
    frozenset({Permission(Domain.ACTION, OpClass.READ), Permission(Domain.EVENT, OpClass.READ)}),
)
# Every valid permission; also the only role allowed to administer roles and actors.
STEWARD = Role(
    "steward",
    frozenset(
        [Permission(d, op) for d in Domain for op in (OpClass.READ, OpClass.WRITE)]
        + [Permission(Domain.EVENT, OpClass.APPEND)]
    ),
)
BUILTIN_ROLES: Mapping[str, Role] = {r.name: r for r in (EVENT_NOTARY, ACTION_TRACKER, STEWARD)}

SYSTEM_ACTOR = "system"


def check(
    actor: Actor | None,
    op_class: OpClass,
    domain: Domain,
    roles: Mapping[str, Role],
) -> Decision:
    """Allowed iff one of the actor's roles grants ``(domain, op_class)``."""
    if actor is None or (op_class is OpClass.APPEND and domain is not Domain.EVENT):
        return Decision(False, DEFAULT_DENY)
    wanted = Permission(domain, op_class)
    for name in sorted(actor.roles):
        role = roles.get(name)
        if role is not None and wanted in role.grants:
            return Decision(True, f"role {name} grants {op_class.value} on {domain.value}")
    return Decision(False, DEFAULT_DENY)


def is_steward(actor: Actor | None) -> Decision:
    if actor is not None and STEWARD.name in actor.roles:
        return Decision(True, f"role {STEWARD.name} administers roles")
    return Decision(False, DEFAULT_DENY)


def readable_domains(actor: Actor | None, roles: Mapping[str, Role]) -> frozenset[Domain]:
    return frozenset(d for d in Domain if check(actor, OpClass.READ, d, roles).allowed)


def roles_document(roles: Iterable[Role], actors: Iterable[Actor]) -> dict[str, object]:
    """Render the roles file: ``{"roles": [...], "actors": [...]}``."""
    return {
        "roles": [r.to_json() for r in sorted(roles, key=lambda r: r.name)],
        "actors": [a.to_json() for a in sorted(actors, key=lambda a: a.actor_id)],
    }


def parse_roles_document(doc: Mapping[str, object]) -> tuple[list[Role], list[Actor]]:
    if not isinstance(doc, Mapping):
        raise InvalidValue("roles file must be a JSON object")
    roles = [Role.from_json(r) for r in doc.get("roles", [])]
    actors = [Actor(str(a["id"]), frozenset(a.get("roles", []))) for a in doc.get("actors", [])]
    return roles, actors

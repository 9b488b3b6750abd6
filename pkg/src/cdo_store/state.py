"""Store state, read views, and log replay.

Every mutation is expressed as ``(action, payload)`` and applied by the
same handler whether it comes from a live call or from replaying the log,
so ``replay(log)`` reproduces the live state by construction.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Optional

from .access import BUILTIN_ROLES, STEWARD, SYSTEM_ACTOR, Actor, Permission, Role
from .canonical import (
    ZERO_DIGEST,
    attrs_from_json,
    attrs_to_json,
    digest,
    encode_record,
    parse_instant,
)
from .consent import RECEIPT_NAMESPACE, ConsentReceipt, ConsentStatus
from .errors import CdoError, CorruptLog
from .eventlog import (
    DEFAULT_SIGNER,
    EVENT_NAMESPACE,
    EventRecord,
    Keyring,
    Signer,
    verify_chain,
)
from .mapping import ConceptHierarchy, Mapping as ConceptMapping, MappingKind
from .model import Correlation, CorrelationKind, Domain, Entity, EntityId

# system action ids
CREATE_ENTITY = "cdo:createEntity"
UPDATE_ENTITY = "cdo:updateEntity"
DELETE_ENTITY = "cdo:deleteEntity"
LINK = "cdo:link"
ADD_BROADER = "cdo:addBroader"
SET_ANCHOR = "cdo:setAnchor"
MAP_CONCEPT = "cdo:mapConcept"
GRANT_CONSENT = "cdo:grantConsent"
REVOKE_CONSENT = "cdo:revokeConsent"
DEFINE_ROLE = "cdo:defineRole"
REGISTER_ACTOR = "cdo:registerActor"
ASSIGN_ROLE = "cdo:assignRole"
DENY = "cdo:deny"

CORRELATION_NAMESPACE = "cor"
MAPPING_NAMESPACE = "map"
ROLE_NAMESPACE = "role"
ACTOR_NAMESPACE = "actor"

# attribute keys on projected event entities
ATTR_SEQ = "cdo.seq"
ATTR_ACTOR = "cdo.actor"
ATTR_ACTION = "cdo.action"
ATTR_SUBJECT = "cdo.subject"
ATTR_TIMESTAMP = "cdo.timestamp"


def _initial_roles() -> dict[str, Role]:
    return dict(BUILTIN_ROLES)


def _initial_actors() -> dict[str, Actor]:
    return {SYSTEM_ACTOR: Actor(SYSTEM_ACTOR, frozenset({STEWARD.name}))}


def _by_render(ids: Iterable[EntityId]) -> list[EntityId]:
    return sorted(ids, key=EntityId.render)


@dataclass
class State:
    """Everything the log folds into (the log itself is kept separately)."""

    entities: dict[EntityId, Entity] = field(default_factory=dict)
    correlations: dict[EntityId, Correlation] = field(default_factory=dict)
    mappings: dict[EntityId, ConceptMapping] = field(default_factory=dict)
    hierarchy: ConceptHierarchy = field(default_factory=ConceptHierarchy)
    anchors: dict[EntityId, EntityId] = field(default_factory=dict)
    consents: dict[EntityId, ConsentReceipt] = field(default_factory=dict)
    roles: dict[str, Role] = field(default_factory=_initial_roles)
    actors: dict[str, Actor] = field(default_factory=_initial_actors)

    def copy(self) -> State:
        return State(
            dict(self.entities),
            dict(self.correlations),
            dict(self.mappings),
            self.hierarchy.copy(),
            dict(self.anchors),
            dict(self.consents),
            dict(self.roles),
            dict(self.actors),
        )

    def canonical(self) -> bytes:
        parts = [encode_record("state", 1)]
        parts += [self.entities[k].canonical() for k in _by_render(self.entities)]
        parts += [self.correlations[k].canonical() for k in _by_render(self.correlations)]
        parts += [self.mappings[k].canonical() for k in _by_render(self.mappings)]
        parts += [encode_record("broader", p, c) for p, c in self.hierarchy.edges()]
        parts += [encode_record("anchor", o, self.anchors[o]) for o in _by_render(self.anchors)]
        parts += [self.consents[k].as_entity().canonical() for k in _by_render(self.consents)]
        parts += [self.roles[k].canonical() for k in sorted(self.roles)]
        parts += [self.actors[k].canonical() for k in sorted(self.actors)]
        return b"".join(parts)

    def digest(self) -> str:
        return digest(self.canonical())

    def content(self) -> tuple:
        """Interchange content: stored entities and everything between them.

        Log-projected events and consent receipts are excluded, as are the
        items that reference them; those travel with the log, not the graph.
        """
        stored = self.entities
        return (
            tuple(stored[k] for k in _by_render(stored)),
            tuple(
                self.correlations[k]
                for k in _by_render(self.correlations)
                if self.correlations[k].a in stored and self.correlations[k].b in stored
            ),
            tuple(
                self.mappings[k]
                for k in _by_render(self.mappings)
                if self.mappings[k].object in stored and self.mappings[k].concept in stored
            ),
            tuple(self.hierarchy.edges()),
            tuple((o, self.anchors[o]) for o in _by_render(self.anchors) if o in stored),
        )


@dataclass(frozen=True)
class EntityState:
    """An entity together with its position in the concept hierarchy.

    This is what ``previous_state``/``final_state`` digests cover for
    entity subjects.
    """

    entity: Entity
    parents: tuple[EntityId, ...] = ()
    anchor: Optional[EntityId] = None

    def canonical(self) -> bytes:
        return self.entity.canonical() + encode_record(
            "position", list(_by_render(self.parents)), self.anchor
        )

    def digest(self) -> str:
        return digest(self.canonical())


def _event_entity(record: EventRecord) -> Entity:
    try:
        stamp: object = parse_instant(record.timestamp)
    except CdoError:
        stamp = record.timestamp
    return Entity(
        EntityId(EVENT_NAMESPACE, str(record.seq)),
        Domain.EVENT,
        {},
        {
            ATTR_SEQ: record.seq,
            ATTR_ACTOR: record.actor,
            ATTR_ACTION: record.action,
            ATTR_SUBJECT: record.subject,
            ATTR_TIMESTAMP: stamp,
        },
    )


class View:
    """Read-only view over a state and its log.

    Event-domain entities ``evt:N`` are projected from log record ``N``;
    receipt entities ``rcpt:...`` from the stored consent receipts.  With
    ``readable`` set, entities in other domains (and correlations touching
    them) are invisible.
    """

    def __init__(
        self,
        state: State,
        records: Sequence[EventRecord] = (),
        readable: Optional[frozenset[Domain]] = None,
    ):
        self.state = state
        self.records = records
        self.readable = readable
        self._events: dict[int, Entity] = {}
        self._adjacency: Optional[dict[EntityId, list[Correlation]]] = None

    def restricted(self, readable: frozenset[Domain]) -> View:
        return View(self.state, self.records, readable)

    def _visible(self, entity: Optional[Entity]) -> Optional[Entity]:
        if entity is None or (self.readable is not None and entity.domain not in self.readable):
            return None
        return entity

    def event_entity(self, seq: int) -> Entity:
        if seq not in self._events:
            self._events[seq] = _event_entity(self.records[seq])
        return self._events[seq]

    def entity(self, eid: EntityId) -> Optional[Entity]:
        if eid.namespace == EVENT_NAMESPACE:
            local = eid.local_name
            if not local.isdigit() or str(int(local)) != local or int(local) >= len(self.records):
                return None
            return self._visible(self.event_entity(int(local)))
        if eid.namespace == RECEIPT_NAMESPACE:
            receipt = self.state.consents.get(eid)
            return self._visible(receipt.as_entity() if receipt else None)
        return self._visible(self.state.entities.get(eid))

    def __contains__(self, eid: object) -> bool:
        return isinstance(eid, EntityId) and self.entity(eid) is not None

    def entities(self) -> list[Entity]:
        found = list(self.state.entities.values())
        found += [r.as_entity() for r in self.state.consents.values()]
        found += [self.event_entity(i) for i in range(len(self.records))]
        visible = [e for e in found if self._visible(e) is not None]
        return sorted(visible, key=lambda e: e.id.render())

    def correlations(self) -> list[Correlation]:
        out = [
            c
            for c in self.state.correlations.values()
            if self.readable is None or (self.entity(c.a) and self.entity(c.b))
        ]
        return sorted(out, key=lambda c: c.id.render())

    def correlations_at(self, eid: EntityId) -> list[Correlation]:
        if self._adjacency is None:
            adjacency: dict[EntityId, list[Correlation]] = {}
            for corr in self.correlations():
                adjacency.setdefault(corr.a, []).append(corr)
                adjacency.setdefault(corr.b, []).append(corr)
            self._adjacency = adjacency
        return self._adjacency.get(eid, [])

    def mappings(self) -> list[ConceptMapping]:
        return sorted(self.state.mappings.values(), key=lambda m: m.id.render())

    @property
    def hierarchy(self) -> ConceptHierarchy:
        return self.state.hierarchy

    def entity_state(self, eid: EntityId) -> Optional[EntityState]:
        entity = self.entity(eid)
        if entity is None:
            return None
        return EntityState(
            entity, tuple(_by_render(self.state.hierarchy.parents(eid))), self.state.anchors.get(eid)
        )

    def subject_digest(self, subject: EntityId) -> str:
        """Digest of a log subject's canonical form, or the all-zero sentinel."""
        ns = subject.namespace
        if ns == CORRELATION_NAMESPACE:
            item = self.state.correlations.get(subject)
        elif ns == MAPPING_NAMESPACE:
            item = self.state.mappings.get(subject)
        elif ns == ROLE_NAMESPACE:
            item = self.state.roles.get(subject.local_name)
        elif ns == ACTOR_NAMESPACE:
            item = self.state.actors.get(subject.local_name)
        else:
            item = self.entity_state(subject)
        return digest(item.canonical()) if item is not None else ZERO_DIGEST


# -- payload codecs -----------------------------------------------------------

def entity_payload(entity: Entity) -> dict[str, object]:
    return {
        "id": entity.id.render(),
        "domain": entity.domain.value,
        "labels": {k: entity.labels[k] for k in sorted(entity.labels)},
        "attributes": attrs_to_json(entity.attributes),
    }


def entity_from_payload(doc: Mapping[str, object]) -> Entity:
    return Entity(
        EntityId.parse(doc["id"]),
        Domain.parse(doc["domain"]),
        dict(doc["labels"]),
        attrs_from_json(doc["attributes"]),
    )


def correlation_payload(corr: Correlation) -> dict[str, object]:
    return {
        "id": corr.id.render(),
        "kind": corr.kind.value,
        "a": corr.a.render(),
        "b": corr.b.render(),
        "attributes": attrs_to_json(corr.attributes),
    }


def correlation_from_payload(doc: Mapping[str, object]) -> Correlation:
    return Correlation(
        EntityId.parse(doc["id"]),
        CorrelationKind.parse(doc["kind"]),
        EntityId.parse(doc["a"]),
        EntityId.parse(doc["b"]),
        attrs_from_json(doc["attributes"]),
    )


def mapping_payload(mapping: ConceptMapping) -> dict[str, object]:
    return {
        "id": mapping.id.render(),
        "concept": mapping.concept.render(),
        "object": mapping.object.render(),
        "kind": mapping.kind.value,
        "vocabulary": mapping.vocabulary,
    }


def mapping_from_payload(doc: Mapping[str, object]) -> ConceptMapping:
    return ConceptMapping(
        EntityId.parse(doc["id"]),
        EntityId.parse(doc["concept"]),
        EntityId.parse(doc["object"]),
        MappingKind.parse(doc["kind"]),
        str(doc["vocabulary"]),
    )


# -- handlers -----------------------------------------------------------------

def _create_entity(state: State, p: Mapping[str, object]) -> None:
    entity = entity_from_payload(p)
    state.entities[entity.id] = entity


def _delete_entity(state: State, p: Mapping[str, object]) -> None:
    del state.entities[EntityId.parse(p["id"])]


def _link(state: State, p: Mapping[str, object]) -> None:
    corr = correlation_from_payload(p)
    state.correlations[corr.id] = corr


def _add_broader(state: State, p: Mapping[str, object]) -> None:
    state.hierarchy.add(EntityId.parse(p["parent"]), EntityId.parse(p["child"]))


def _set_anchor(state: State, p: Mapping[str, object]) -> None:
    state.anchors[EntityId.parse(p["object"])] = EntityId.parse(p["concept"])


def _map_concept(state: State, p: Mapping[str, object]) -> None:
    mapping = mapping_from_payload(p)
    if p.get("correlation"):
        cid = EntityId.parse(p["correlation"])
        state.correlations[cid] = Correlation(cid, CorrelationKind.SCHEME, mapping.object, mapping.concept)
    state.mappings[mapping.id] = mapping


def _grant_consent(state: State, p: Mapping[str, object]) -> None:
    rid = EntityId.parse(p["id"])
    state.consents[rid] = ConsentReceipt(
        rid,
        str(p["subject"]),
        str(p["purpose"]),
        frozenset(EntityId.parse(e) for e in p["scope"]),
        ConsentStatus.GRANTED,
        parse_instant(p["at"]),
    )


def _revoke_consent(state: State, p: Mapping[str, object]) -> None:
    rid = EntityId.parse(p["id"])
    state.consents[rid] = replace(
        state.consents[rid], status=ConsentStatus.REVOKED, revoked_at=parse_instant(p["at"])
    )


def _define_role(state: State, p: Mapping[str, object]) -> None:
    role = Role(str(p["name"]), frozenset(Permission.from_json(g) for g in p["grants"]))
    state.roles[role.name] = role


def _register_actor(state: State, p: Mapping[str, object]) -> None:
    actor = Actor(str(p["id"]), frozenset(p["roles"]))
    state.actors[actor.actor_id] = actor


def _assign_role(state: State, p: Mapping[str, object]) -> None:
    actor = state.actors[str(p["actor"])]
    state.actors[actor.actor_id] = replace(actor, roles=actor.roles | {str(p["role"])})


def _no_change(state: State, p: Mapping[str, object]) -> None:
    return None


HANDLERS: Mapping[str, Callable[[State, Mapping[str, object]], None]] = {
    CREATE_ENTITY: _create_entity,
    UPDATE_ENTITY: _create_entity,
    DELETE_ENTITY: _delete_entity,
    LINK: _link,
    ADD_BROADER: _add_broader,
    SET_ANCHOR: _set_anchor,
    MAP_CONCEPT: _map_concept,
    GRANT_CONSENT: _grant_consent,
    REVOKE_CONSENT: _revoke_consent,
    DEFINE_ROLE: _define_role,
    REGISTER_ACTOR: _register_actor,
    ASSIGN_ROLE: _assign_role,
    DENY: _no_change,
}


def apply_action(state: State, action: str, payload: Mapping[str, object]) -> None:
    handler = HANDLERS.get(action)
    if handler is None:
        if action.startswith("cdo:"):
            raise CorruptLog(f"unknown system action {action!r}")
        return  # notarized domain event: recorded, no stored-state change
    handler(state, payload)


def replay(
    records: Sequence[EventRecord],
    keyring: Keyring,
    upto_seq: Optional[int] = None,
    *,
    signer: Signer = DEFAULT_SIGNER,
) -> State:
    """Fold records ``0..upto_seq`` (inclusive) into a fresh state.

    ``upto_seq=-1`` gives the empty state; ``None`` replays everything.
    The whole log must verify first.
    """
    report = verify_chain(records, keyring, signer)
    if not report.valid:
        raise CorruptLog(
            f"log fails verification at seq {report.first_bad_seq}: {report.failure_kind.value}",
            report,
        )
    last = len(records) - 1 if upto_seq is None else upto_seq
    if not -1 <= last < len(records):
        raise ValueError(f"upto_seq {upto_seq} outside 0..{len(records) - 1}")
    state = State()
    for record in records[: last + 1]:
        try:
            apply_action(state, record.action, record.payload)
        except CorruptLog:
            raise
        except (CdoError, KeyError, TypeError, ValueError) as exc:
            raise CorruptLog(f"record {record.seq} cannot be applied: {exc}") from exc
    return state


__all__ = [
    "EntityState",
    "HANDLERS",
    "State",
    "View",
    "apply_action",
    "replay",
]

"""The store: a single-writer facade over state, log, and access control."""

from __future__ import annotations

import threading
from collections.abc import Iterable, Mapping, Sequence
from datetime import datetime
from typing import Optional, Protocol

from . import consent as consent_mod
from . import mapping as mapping_mod
from .access import (
    SYSTEM_ACTOR,
    Actor,
    Decision,
    OpClass,
    Permission,
    Role,
    check,
    is_steward,
    parse_roles_document,
    readable_domains,
)
from .canonical import ZERO_DIGEST, digest, encode_token, format_instant, normalize_instant
from .consent import AuditReport, ConsentReceipt, ConsentStatus, ProvenanceChain
from .errors import (
    AlreadyRevoked,
    AnchorExists,
    ClockRegression,
    CycleDetected,
    DuplicateActor,
    DuplicateEdge,
    DuplicateId,
    DuplicateMapping,
    DuplicateRole,
    EmptyScope,
    EntityInUse,
    InvalidId,
    InvalidValue,
    MappingKindConflict,
    MissingAnchor,
    SameDomainPair,
    Unauthorized,
    UnknownActor,
    UnknownEntity,
    UnknownReceipt,
    UnknownRole,
    WrongDomain,
)
from .eventlog import (
    DEFAULT_SIGNER,
    Clock,
    EventLog,
    EventRecord,
    Keyring,
    Signer,
    VerificationReport,
    verify_chain,
)
from .mapping import Mapping as ConceptMapping, MappingKind
from .model import Correlation, CorrelationKind, Domain, Entity, EntityId, validate_key
from .state import (
    ADD_BROADER,
    ASSIGN_ROLE,
    CORRELATION_NAMESPACE,
    CREATE_ENTITY,
    DEFINE_ROLE,
    DELETE_ENTITY,
    DENY,
    GRANT_CONSENT,
    LINK,
    MAP_CONCEPT,
    MAPPING_NAMESPACE,
    REGISTER_ACTOR,
    REVOKE_CONSENT,
    SET_ANCHOR,
    UPDATE_ENTITY,
    EntityState,
    State,
    View,
    apply_action,
    correlation_payload,
    entity_payload,
    mapping_payload,
    replay,
)

STORE_SUBJECT = EntityId("cdo", "store")
RESERVED_ATTR_PREFIX = "cdo."

IdLike = "EntityId | str"


class Snapshottable(Protocol):
    def canonical(self) -> bytes: ...


def _id(value: EntityId | str) -> EntityId:
    return value if isinstance(value, EntityId) else EntityId.parse(value)


def _user_id(value: EntityId | str) -> EntityId:
    eid = _id(value)
    if eid.reserved:
        raise InvalidId(f"namespace {eid.namespace!r} is reserved for the store")
    return eid


def _user_attributes(attrs: Mapping[str, object] | None) -> Mapping[str, object] | None:
    for key in attrs or ():
        if isinstance(key, str) and key.startswith(RESERVED_ATTR_PREFIX):
            raise InvalidValue(f"attribute keys starting with {RESERVED_ATTR_PREFIX!r} are reserved")
    return attrs


class Store:
    """Quadrimodal knowledge store.

    All mutations are serialized through one lock, authorized against the
    actor's roles (denials are logged, then raised), and recorded as
    exactly one signed :class:`EventRecord`.  Reads go through
    :meth:`snapshot`, which returns an immutable :class:`View`.
    """

    def __init__(
        self,
        *,
        clock: Clock,
        keyring: Optional[Keyring] = None,
        signer: Signer = DEFAULT_SIGNER,
        state: Optional[State] = None,
        log: Optional[EventLog] = None,
    ):
        self._clock = clock
        self.keyring = keyring if keyring is not None else Keyring()
        if SYSTEM_ACTOR not in self.keyring:
            self.keyring.add(SYSTEM_ACTOR)
        self.signer = signer
        self._state = state if state is not None else State()
        self._log = log if log is not None else EventLog()
        self._lock = threading.RLock()

    @classmethod
    def from_log(
        cls,
        records: Sequence[EventRecord],
        *,
        clock: Clock,
        keyring: Keyring,
        signer: Signer = DEFAULT_SIGNER,
    ) -> Store:
        """Rebuild a live store from a verified log."""
        state = replay(records, keyring, signer=signer)
        return cls(clock=clock, keyring=keyring, signer=signer, state=state, log=EventLog(records))

    # -- reads ----------------------------------------------------------------

    @property
    def log(self) -> tuple[EventRecord, ...]:
        return self._log.records

    def __len__(self) -> int:
        return len(self._state.entities)

    def snapshot(self, actor: Optional[str] = None) -> View:
        """Immutable view; with ``actor``, limited to the domains it may read."""
        with self._lock:
            view = View(self._state.copy(), self._log.records)
            if actor is None:
                return view
            return view.restricted(readable_domains(view.state.actors.get(actor), view.state.roles))

    def state_digest(self) -> str:
        with self._lock:
            return self._state.digest()

    def state_copy(self) -> State:
        with self._lock:
            return self._state.copy()

    def _view(self) -> View:
        return View(self._state, self._log)

    def get_entity(self, eid: EntityId | str) -> Entity:
        entity = self._view().entity(_id(eid))
        if entity is None:
            raise UnknownEntity(f"no entity {eid}")
        return entity

    def entity_state(self, eid: EntityId | str) -> EntityState:
        found = self._view().entity_state(_id(eid))
        if found is None:
            raise UnknownEntity(f"no entity {eid}")
        return found

    def verify(self) -> VerificationReport:
        return verify_chain(self._log.records, self.keyring, self.signer)

    def replay(self, upto_seq: Optional[int] = None) -> State:
        return replay(self._log.records, self.keyring, upto_seq, signer=self.signer)

    def check(self, actor_id: str, op_class: OpClass | str, domain: Domain | str) -> Decision:
        return check(
            self._state.actors.get(actor_id),
            OpClass.parse(op_class),
            Domain.parse(domain),
            self._state.roles,
        )

    # -- internals ------------------------------------------------------------

    def _require(self, eid: EntityId | str, domain: Optional[Domain] = None) -> Entity:
        entity = self.get_entity(eid)
        if domain is not None and entity.domain is not domain:
            raise WrongDomain(f"{entity.id} is {entity.domain.value}, expected {domain.value}")
        return entity

    def _fresh_id(self, namespace: str, taken: Mapping[EntityId, object]) -> EntityId:
        base = str(len(self._log))
        candidate = EntityId(namespace, base)
        suffix = 0
        while candidate in taken:
            suffix += 1
            candidate = EntityId(namespace, f"{base}.{suffix}")
        return candidate

    def _commit(
        self,
        actor: str,
        action: str,
        subject: EntityId,
        payload: Mapping[str, object],
        *,
        timestamp: Optional[datetime] = None,
        previous: Optional[str] = None,
        final: Optional[str] = None,
    ) -> EventRecord:
        encode_token(payload)  # fail before touching state
        key = self.keyring.get(actor)
        stamp = normalize_instant(timestamp if timestamp is not None else self._clock())
        self._log.check_timestamp(stamp)
        before = previous if previous is not None else self._view().subject_digest(subject)
        apply_action(self._state, action, payload)
        after = final if final is not None else self._view().subject_digest(subject)
        return self._log.append(
            actor=actor,
            action=action,
            subject=subject.render(),
            previous_state=before,
            final_state=after,
            timestamp=stamp,
            payload=payload,
            key=key,
            signer=self.signer,
        )

    def _deny(
        self,
        actor_id: str,
        operation: str,
        op_class: str,
        domain: Optional[Domain],
        subject: Optional[EntityId],
        decision: Decision,
    ) -> None:
        subject = subject or STORE_SUBJECT
        current = self._view().subject_digest(subject)
        self._commit(
            SYSTEM_ACTOR,
            DENY,
            subject,
            {
                "denied_actor": str(actor_id),
                "operation": operation,
                "op_class": op_class,
                "domain": domain.value if domain else None,
                "reason": decision.reason,
            },
            previous=current,
            final=current,
        )
        raise Unauthorized(decision, operation)

    def authorize(
        self,
        actor_id: str,
        operation: str,
        needs: Iterable[tuple[OpClass, Domain]],
        subject: Optional[EntityId] = None,
    ) -> None:
        """Require every ``(op_class, domain)``; the first denial is logged and raised."""
        actor = self._state.actors.get(actor_id)
        for op_class, domain in needs:
            decision = check(actor, op_class, domain, self._state.roles)
            if not decision.allowed:
                self._deny(actor_id, operation, op_class.value, domain, subject, decision)

    def _authorize_admin(self, actor_id: str, operation: str, subject: EntityId) -> None:
        decision = is_steward(self._state.actors.get(actor_id))
        if not decision.allowed:
            self._deny(actor_id, operation, "admin", None, subject, decision)

    # -- entities ---------------------------------------------------------------

    def create_entity(
        self,
        actor: str,
        id: EntityId | str,
        domain: Domain | str,
        labels: Optional[Mapping[str, str]] = None,
        attributes: Optional[Mapping[str, object]] = None,
    ) -> Entity:
        with self._lock:
            eid = _user_id(id)
            entity = Entity(eid, Domain.parse(domain), labels or {}, _user_attributes(attributes) or {})
            self.authorize(actor, "create_entity", [(OpClass.WRITE, entity.domain)], eid)
            if self._view().entity(eid) is not None:
                raise DuplicateId(f"{eid} already exists")
            self._commit(actor, CREATE_ENTITY, eid, entity_payload(entity))
            return entity

    def update_entity(
        self,
        actor: str,
        id: EntityId | str,
        labels: Optional[Mapping[str, str]] = None,
        attributes: Optional[Mapping[str, object]] = None,
    ) -> Entity:
        """Replace labels and/or attributes; the domain never changes."""
        with self._lock:
            eid = _user_id(id)
            existing = self._require(eid)
            updated = Entity(
                eid,
                existing.domain,
                existing.labels if labels is None else labels,
                existing.attributes if attributes is None else _user_attributes(attributes),
            )
            self.authorize(actor, "update_entity", [(OpClass.WRITE, existing.domain)], eid)
            self._commit(actor, UPDATE_ENTITY, eid, entity_payload(updated))
            return updated

    def delete_entity(self, actor: str, id: EntityId | str) -> None:
        with self._lock:
            eid = _user_id(id)
            existing = self._require(eid)
            self.authorize(actor, "delete_entity", [(OpClass.WRITE, existing.domain)], eid)
            state = self._state
            in_use = (
                any(eid in (c.a, c.b) for c in state.correlations.values())
                or any(eid in (m.concept, m.object) for m in state.mappings.values())
                or state.hierarchy.is_referenced(eid)
                or eid in state.anchors
                or eid in state.anchors.values()
                or any(eid in r.scope for r in state.consents.values())
            )
            if in_use:
                raise EntityInUse(f"{eid} is still referenced")
            self._commit(actor, DELETE_ENTITY, eid, {"id": eid.render()})

    # -- correlations -----------------------------------------------------------

    def link(
        self,
        actor: str,
        a: EntityId | str,
        b: EntityId | str,
        attributes: Optional[Mapping[str, object]] = None,
        *,
        correlation_id: EntityId | str | None = None,
    ) -> Correlation:
        with self._lock:
            first, second = self._require(a), self._require(b)
            if first.domain is second.domain:
                raise SameDomainPair(
                    f"{first.id} and {second.id} are both {first.domain.value}"
                )
            self.authorize(
                actor,
                "link",
                [(OpClass.WRITE, first.domain), (OpClass.WRITE, second.domain)],
            )
            if correlation_id is not None:
                cid = _id(correlation_id)
                if cid.namespace != CORRELATION_NAMESPACE:
                    raise InvalidId(f"correlation ids live in {CORRELATION_NAMESPACE}:")
                if cid in self._state.correlations:
                    raise DuplicateId(f"{cid} already exists")
            else:
                cid = self._fresh_id(CORRELATION_NAMESPACE, self._state.correlations)
            corr = Correlation.between(cid, first, second, attributes)
            self._commit(actor, LINK, cid, correlation_payload(corr))
            return corr

    def correlations_between(self, a: EntityId | str, b: EntityId | str) -> list[Correlation]:
        pair = {_id(a), _id(b)}
        return sorted(
            (c for c in self._state.correlations.values() if {c.a, c.b} == pair),
            key=lambda c: c.id.render(),
        )

    # -- hierarchy and mappings -------------------------------------------------

    def add_broader(self, actor: str, parent: EntityId | str, child: EntityId | str) -> None:
        with self._lock:
            p = self._require(parent, Domain.CONCEPT)
            c = self._require(child, Domain.CONCEPT)
            self.authorize(actor, "add_broader", [(OpClass.WRITE, Domain.CONCEPT)], c.id)
            hierarchy = self._state.hierarchy
            if hierarchy.has_edge(p.id, c.id):
                raise DuplicateEdge(f"{p.id} is already broader than {c.id}")
            if hierarchy.would_cycle(p.id, c.id):
                raise CycleDetected(f"{p.id} broader than {c.id} would close a cycle")
            self._commit(
                actor, ADD_BROADER, c.id, {"parent": p.id.render(), "child": c.id.render()}
            )

    def set_anchor(self, actor: str, object: EntityId | str, concept: EntityId | str) -> None:
        with self._lock:
            o = self._require(object, Domain.OBJECT)
            c = self._require(concept, Domain.CONCEPT)
            self.authorize(
                actor,
                "set_anchor",
                [(OpClass.WRITE, Domain.OBJECT), (OpClass.WRITE, Domain.CONCEPT)],
                o.id,
            )
            if o.id in self._state.anchors:
                raise AnchorExists(f"{o.id} is already anchored at {self._state.anchors[o.id]}")
            self._commit(
                actor, SET_ANCHOR, o.id, {"object": o.id.render(), "concept": c.id.render()}
            )

    def anchor_of(self, object: EntityId | str) -> EntityId:
        try:
            return self._state.anchors[_id(object)]
        except KeyError:
            raise MissingAnchor(f"{object} has no anchor concept") from None

    def _in_hierarchy(self, concept: EntityId) -> bool:
        return concept in self._state.hierarchy or concept in self._state.anchors.values()

    def classify_match(self, local: EntityId | str, object: EntityId | str) -> MappingKind:
        with self._lock:
            l = self._require(local, Domain.CONCEPT)
            o = self._require(object, Domain.OBJECT)
            return mapping_mod.classify_match(self._state.hierarchy, l.id, self.anchor_of(o.id))

    def map_concept(
        self,
        actor: str,
        concept: EntityId | str,
        object: EntityId | str,
        vocabulary: str,
        kind: MappingKind | str | None = None,
        *,
        mapping_id: EntityId | str | None = None,
    ) -> ConceptMapping:
        """Align a concept with a pivot object.

        When the object is anchored and the concept sits in the hierarchy
        the kind is derived (a conflicting explicit ``kind`` is an error);
        otherwise the caller's kind is used, defaulting to Equivalent.
        """
        with self._lock:
            c = self._require(concept, Domain.CONCEPT)
            o = self._require(object, Domain.OBJECT)
            validate_key(vocabulary, "vocabulary tag")
            requested = MappingKind.parse(kind) if kind is not None else None
            self.authorize(
                actor,
                "map_concept",
                [(OpClass.WRITE, Domain.CONCEPT), (OpClass.WRITE, Domain.OBJECT)],
                c.id,
            )
            state = self._state
            if any(m.key == (c.id, o.id, vocabulary) for m in state.mappings.values()):
                raise DuplicateMapping(f"{c.id} -> {o.id} already mapped in {vocabulary!r}")
            anchor = state.anchors.get(o.id)
            if anchor is not None and self._in_hierarchy(c.id):
                derived = mapping_mod.classify_match(state.hierarchy, c.id, anchor)
                if requested is not None and requested is not derived:
                    raise MappingKindConflict(
                        f"{c.id} is {derived.value} relative to {o.id}, not {requested.value}"
                    )
                final_kind = derived
            else:
                final_kind = requested or MappingKind.EQUIVALENT
            if mapping_id is not None:
                mid = _id(mapping_id)
                if mid.namespace != MAPPING_NAMESPACE:
                    raise InvalidId(f"mapping ids live in {MAPPING_NAMESPACE}:")
                if mid in state.mappings:
                    raise DuplicateId(f"{mid} already exists")
            else:
                mid = self._fresh_id(MAPPING_NAMESPACE, state.mappings)
            mapping = ConceptMapping(mid, c.id, o.id, final_kind, vocabulary)
            has_scheme = any(
                corr.kind is CorrelationKind.SCHEME and {corr.a, corr.b} == {c.id, o.id}
                for corr in state.correlations.values()
            )
            payload = mapping_payload(mapping)
            payload["correlation"] = (
                None if has_scheme else self._fresh_id(CORRELATION_NAMESPACE, state.correlations).render()
            )
            self._commit(actor, MAP_CONCEPT, mid, payload)
            return mapping

    def translate(self, term: EntityId | str, target_vocabulary: str) -> set[EntityId]:
        with self._lock:
            return mapping_mod.translate(self._state.mappings.values(), _id(term), target_vocabulary)

    def import_vocabulary(self, actor: str, lines: Iterable[str]) -> list[ConceptMapping]:
        """Apply a vocabulary file (JSON Lines); the whole file parses first."""
        entries = list(mapping_mod.parse_vocabulary_lines(lines))
        return [
            self.map_concept(actor, e.concept, e.object, e.vocabulary, e.kind) for e in entries
        ]

    # -- events -------------------------------------------------------------------

    def append_event(
        self,
        actor: str,
        action: EntityId | str,
        subject: EntityId | str,
        before: Optional[Snapshottable] = None,
        after: Optional[Snapshottable] = None,
        timestamp: Optional[datetime] = None,
    ) -> EventRecord:
        """Notarize a domain event: ``actor`` performed ``action`` on ``subject``.

        ``before``/``after`` are snapshots (``Entity`` or ``EntityState``);
        absent ones take the all-zero digest.
        """
        with self._lock:
            act = self._require(action, Domain.ACTION)
            subj = self.get_entity(subject)
            self.authorize(actor, "append_event", [(OpClass.APPEND, Domain.EVENT)], subj.id)
            return self._commit(
                actor,
                act.id.render(),
                subj.id,
                {},
                timestamp=timestamp,
                previous=digest(before.canonical()) if before is not None else ZERO_DIGEST,
                final=digest(after.canonical()) if after is not None else ZERO_DIGEST,
            )

    # -- consent and provenance -------------------------------------------------------

    def record_consent(
        self, actor: str, subject: str, purpose: str, scope: Iterable[EntityId | str], at: datetime
    ) -> ConsentReceipt:
        with self._lock:
            ids = sorted({_id(e) for e in scope}, key=EntityId.render)
            if not ids:
                raise EmptyScope("consent needs at least one scoped entity")
            for eid in ids:
                self.get_entity(eid)
            validate_key(subject, "data subject")
            validate_key(purpose, "purpose")
            at = normalize_instant(at)
            self.authorize(actor, "record_consent", [(OpClass.WRITE, Domain.OBJECT)])
            rid = self._fresh_id(consent_mod.RECEIPT_NAMESPACE, self._state.consents)
            self._commit(
                actor,
                GRANT_CONSENT,
                rid,
                {
                    "id": rid.render(),
                    "subject": subject,
                    "purpose": purpose,
                    "scope": [e.render() for e in ids],
                    "at": format_instant(at),
                },
            )
            return self._state.consents[rid]

    def revoke_consent(self, actor: str, receipt_id: EntityId | str, at: datetime) -> ConsentReceipt:
        with self._lock:
            rid = _id(receipt_id)
            receipt = self._state.consents.get(rid)
            if receipt is None:
                raise UnknownReceipt(f"no consent receipt {rid}")
            at = normalize_instant(at)
            self.authorize(actor, "revoke_consent", [(OpClass.WRITE, Domain.OBJECT)], rid)
            if receipt.status is ConsentStatus.REVOKED:
                raise AlreadyRevoked(f"{rid} was revoked at {format_instant(receipt.revoked_at)}")
            if at < receipt.granted_at:
                raise ClockRegression(f"revocation at {format_instant(at)} precedes the grant")
            self._commit(actor, REVOKE_CONSENT, rid, {"id": rid.render(), "at": format_instant(at)})
            return self._state.consents[rid]

    def receipts(self) -> list[ConsentReceipt]:
        return sorted(self._state.consents.values(), key=lambda r: r.receipt_id.render())

    def check_usage_allowed(self, entity: EntityId | str, purpose: str, at: datetime) -> Decision:
        with self._lock:
            eid = self.get_entity(entity).id
            return consent_mod.check_usage_allowed(
                self._state.consents.values(), eid, purpose, normalize_instant(at)
            )

    def lineage(self, entity: EntityId | str) -> ProvenanceChain:
        return consent_mod.lineage(self._log.records, _id(entity), self.keyring)

    def audit_report(
        self, scope: Iterable[EntityId | str], purpose: str, at: datetime
    ) -> AuditReport:
        return consent_mod.audit_report(
            self.snapshot(), self.keyring, [_id(e) for e in scope], purpose, normalize_instant(at)
        )

    # -- roles and actors -------------------------------------------------------------

    def define_role(self, actor: str, name: str, grants: Iterable[Permission]) -> Role:
        with self._lock:
            role = Role(name, frozenset(grants))
            subject = EntityId("role", role.name)
            self._authorize_admin(actor, "define_role", subject)
            if role.name in self._state.roles:
                raise DuplicateRole(f"role {role.name!r} already exists")
            self._commit(actor, DEFINE_ROLE, subject, role.to_json())
            return role

    def register_actor(
        self, actor: str, actor_id: str, roles: Iterable[str] = (), key: Optional[bytes] = None
    ) -> Actor:
        with self._lock:
            new = Actor(actor_id, frozenset(roles))
            subject = EntityId("actor", new.actor_id)
            self._authorize_admin(actor, "register_actor", subject)
            if new.actor_id in self._state.actors:
                raise DuplicateActor(f"actor {new.actor_id!r} already exists")
            missing = sorted(r for r in new.roles if r not in self._state.roles)
            if missing:
                raise UnknownRole(f"unknown roles {missing}")
            if key is not None or new.actor_id not in self.keyring:
                self.keyring.add(new.actor_id, key)
            self._commit(actor, REGISTER_ACTOR, subject, new.to_json())
            return new

    def assign_role(self, actor: str, actor_id: str, role: str) -> Actor:
        with self._lock:
            subject = EntityId("actor", actor_id)
            self._authorize_admin(actor, "assign_role", subject)
            target = self._state.actors.get(actor_id)
            if target is None:
                raise UnknownActor(f"no actor {actor_id!r}")
            if role not in self._state.roles:
                raise UnknownRole(f"no role {role!r}")
            if role in target.roles:
                return target
            self._commit(actor, ASSIGN_ROLE, subject, {"actor": actor_id, "role": role})
            return self._state.actors[actor_id]

    def roles(self) -> list[Role]:
        return sorted(self._state.roles.values(), key=lambda r: r.name)

    def actors(self) -> list[Actor]:
        return sorted(self._state.actors.values(), key=lambda a: a.actor_id)

    def apply_roles_document(self, actor: str, doc: Mapping[str, object]) -> int:
        """Bring roles and actor assignments in line with a roles file.

        Returns the number of changes made.
        """
        roles, actors = parse_roles_document(doc)
        changes = 0
        for role in roles:
            existing = self._state.roles.get(role.name)
            if existing is None:
                self.define_role(actor, role.name, role.grants)
                changes += 1
            elif existing.grants != role.grants:
                raise DuplicateRole(f"role {role.name!r} exists with different grants")
        for entry in actors:
            current = self._state.actors.get(entry.actor_id)
            if current is None:
                self.register_actor(actor, entry.actor_id, entry.roles)
                changes += 1
                continue
            for role_name in sorted(entry.roles - current.roles):
                self.assign_role(actor, entry.actor_id, role_name)
                changes += 1
        return changes

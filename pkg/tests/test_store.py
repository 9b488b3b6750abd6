from __future__ import annotations

import random
import threading
from datetime import timedelta

import pytest
from hypothesis import given, settings, strategies as st

from cdo_store import Domain, EntityId, MappingKind, OpClass, Permission, Store
from cdo_store.canonical import ZERO_DIGEST
from cdo_store.errors import (
    AnchorExists,
    ClockRegression,
    CycleDetected,
    DuplicateActor,
    DuplicateEdge,
    DuplicateId,
    DuplicateMapping,
    EntityInUse,
    InvalidId,
    InvalidValue,
    MappingKindConflict,
    MissingAnchor,
    SameDomainPair,
    Unauthorized,
    UnknownEntity,
    UnknownRole,
    WrongDomain,
)
from cdo_store.eventlog import StepClock, SystemClock
from cdo_store.state import DENY

from helpers import T0, new_store, ref_entity_state_digest
from ops import random_operations, run_operations


def test_create_logs_one_record_with_state_digests(store):
    entity = store.create_entity("system", "ex:a", Domain.OBJECT, {"en": "A"}, {"n": 1})
    (record,) = store.log
    assert record.action == "cdo:createEntity"
    assert record.subject == "ex:a"
    assert record.previous_state == ZERO_DIGEST
    assert record.final_state == ref_entity_state_digest(entity)
    assert store.verify().valid


def test_update_keeps_domain_and_chains_digests(store):
    store.create_entity("system", "ex:a", Domain.OBJECT, {"en": "A"})
    store.update_entity("system", "ex:a", attributes={"n": 2})
    first, second = store.log
    assert second.previous_state == first.final_state
    assert store.get_entity("ex:a").labels == {"en": "A"}
    assert store.get_entity("ex:a").domain is Domain.OBJECT


def test_entity_errors(store):
    store.create_entity("system", "ex:a", Domain.OBJECT)
    with pytest.raises(DuplicateId):
        store.create_entity("system", "ex:a", Domain.CONCEPT)
    with pytest.raises(InvalidId):
        store.create_entity("system", "evt:9", Domain.EVENT)
    with pytest.raises(InvalidValue):
        store.create_entity("system", "ex:b", Domain.OBJECT, attributes={"cdo.x": 1})
    with pytest.raises(UnknownEntity):
        store.update_entity("system", "ex:zz", {"en": "x"})
    assert len(store.log) == 1


def test_link_derives_kind_and_orientation(store):
    store.create_entity("system", "ex:act", Domain.ACTION)
    store.create_entity("system", "ex:obj", Domain.OBJECT)
    store.create_entity("system", "ex:obj2", Domain.OBJECT)
    corr = store.link("system", "ex:act", "ex:obj")
    assert corr.kind.value == "Cause"
    assert (corr.a, corr.b) == (EntityId("ex", "obj"), EntityId("ex", "act"))
    with pytest.raises(SameDomainPair):
        store.link("system", "ex:obj", "ex:obj2")
    assert store.correlations_between("ex:obj", "ex:act") == [corr]


def test_delete_refuses_referenced_entities(store):
    store.create_entity("system", "ex:o", Domain.OBJECT)
    store.create_entity("system", "ex:c", Domain.CONCEPT)
    store.link("system", "ex:o", "ex:c")
    with pytest.raises(EntityInUse):
        store.delete_entity("system", "ex:o")
    store.create_entity("system", "ex:loose", Domain.OBJECT)
    store.delete_entity("system", "ex:loose")
    with pytest.raises(UnknownEntity):
        store.get_entity("ex:loose")
    assert store.log[-1].final_state == ZERO_DIGEST


def test_hierarchy_and_anchor_errors(store):
    for name in ("a", "b", "c"):
        store.create_entity("system", f"ex:{name}", Domain.CONCEPT)
    store.create_entity("system", "ex:o", Domain.OBJECT)
    store.add_broader("system", "ex:a", "ex:b")
    store.add_broader("system", "ex:b", "ex:c")
    with pytest.raises(DuplicateEdge):
        store.add_broader("system", "ex:a", "ex:b")
    with pytest.raises(CycleDetected):
        store.add_broader("system", "ex:c", "ex:a")
    with pytest.raises(WrongDomain):
        store.add_broader("system", "ex:o", "ex:a")
    with pytest.raises(MissingAnchor):
        store.classify_match("ex:c", "ex:o")
    store.set_anchor("system", "ex:o", "ex:b")
    with pytest.raises(AnchorExists):
        store.set_anchor("system", "ex:o", "ex:a")
    assert store.classify_match("ex:a", "ex:o") is MappingKind.BROADER
    assert store.classify_match("ex:c", "ex:o") is MappingKind.NARROWER


def test_map_concept_derives_kind_and_adds_scheme(store):
    for name in ("a", "b"):
        store.create_entity("system", f"ex:{name}", Domain.CONCEPT)
    store.create_entity("system", "ex:o", Domain.OBJECT)
    store.add_broader("system", "ex:a", "ex:b")
    store.set_anchor("system", "ex:o", "ex:b")
    m = store.map_concept("system", "ex:a", "ex:o", "en")
    assert m.kind is MappingKind.BROADER
    assert [c.kind.value for c in store.correlations_between("ex:a", "ex:o")] == ["Scheme"]
    with pytest.raises(DuplicateMapping):
        store.map_concept("system", "ex:a", "ex:o", "en")
    with pytest.raises(MappingKindConflict):
        store.map_concept("system", "ex:a", "ex:o", "fr", "equivalent")
    # a second vocabulary reuses the existing Scheme correlation
    store.map_concept("system", "ex:a", "ex:o", "de")
    assert len(store.correlations_between("ex:a", "ex:o")) == 1


def test_denial_is_logged_once_and_changes_nothing(store):
    store.register_actor("system", "tracker", ["action-tracker"])
    digest = store.state_digest()
    with pytest.raises(Unauthorized):
        store.create_entity("tracker", "ex:a", Domain.ACTION)
    record = store.log[-1]
    assert record.action == DENY
    assert record.actor == "system"
    assert record.payload["denied_actor"] == "tracker"
    assert record.payload["reason"] == "default-deny"
    assert store.state_digest() == digest
    assert store.verify().valid


def test_unregistered_actor_is_denied(store):
    with pytest.raises(Unauthorized):
        store.create_entity("nobody", "ex:a", Domain.OBJECT)
    assert store.log[-1].payload["denied_actor"] == "nobody"


def test_role_administration_needs_steward(store):
    store.define_role("system", "writer", [Permission(Domain.OBJECT, OpClass.WRITE)])
    store.register_actor("system", "w", ["writer"])
    with pytest.raises(Unauthorized):
        store.define_role("w", "sneaky", [Permission(Domain.CONCEPT, OpClass.WRITE)])
    with pytest.raises(DuplicateActor):
        store.register_actor("system", "w")
    with pytest.raises(UnknownRole):
        store.assign_role("system", "w", "ghost")
    store.create_entity("w", "ex:a", Domain.OBJECT)
    with pytest.raises(Unauthorized):
        store.create_entity("w", "ex:c", Domain.CONCEPT)
    store.assign_role("system", "w", "steward")
    store.create_entity("w", "ex:c", Domain.CONCEPT)


def test_snapshot_view_is_isolated_and_filtered(store):
    store.create_entity("system", "ex:o", Domain.OBJECT)
    store.create_entity("system", "ex:a", Domain.ACTION)
    store.register_actor("system", "tracker", ["action-tracker"])
    view = store.snapshot()
    store.create_entity("system", "ex:later", Domain.OBJECT)
    assert view.entity(EntityId("ex", "later")) is None
    restricted = store.snapshot("tracker")
    domains = {e.domain for e in restricted.entities()}
    assert Domain.OBJECT not in domains and Domain.ACTION in domains


def test_append_event_projects_an_event_entity(store):
    store.create_entity("system", "ex:act", Domain.ACTION)
    store.create_entity("system", "ex:o", Domain.OBJECT)
    store.register_actor("system", "notary", ["event-notary"])
    before = store.entity_state("ex:o")
    record = store.append_event("notary", "ex:act", "ex:o", before=before)
    assert record.previous_state == before.digest()
    assert record.final_state == ZERO_DIGEST
    evt = store.get_entity(record.event_entity)
    assert evt.domain is Domain.EVENT
    with pytest.raises(WrongDomain):
        store.append_event("notary", "ex:o", "ex:o")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(5, 60))
def test_replay_reproduces_every_prefix(seed, n):
    store = new_store()
    run_operations(store, random_operations(random.Random(seed), n))
    assert store.verify().valid
    assert store.replay().digest() == store.state_digest()
    rebuilt = Store.from_log(store.log, clock=SystemClock(), keyring=store.keyring)
    assert rebuilt.state_digest() == store.state_digest()


def test_concurrent_writers_keep_a_valid_chain():
    store = Store(clock=SystemClock())
    errors = []

    def writer(k: int) -> None:
        try:
            for i in range(40):
                store.create_entity("system", f"ex:t{k}_{i}", Domain.OBJECT)
                store.snapshot()
        except Exception as exc:  # pragma: no cover - surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=writer, args=(k,)) for k in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(store.log) == 240
    assert [r.seq for r in store.log] == list(range(240))
    assert store.verify().valid
    assert store.replay().digest() == store.state_digest()


def test_clock_regression_leaves_state_untouched():
    store = Store(clock=StepClock(T0, -timedelta(seconds=1)))
    store.create_entity("system", "ex:a", Domain.OBJECT)
    digest = store.state_digest()
    with pytest.raises(ClockRegression):
        store.create_entity("system", "ex:b", Domain.OBJECT)
    assert store.state_digest() == digest
    assert len(store.log) == 1

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from cdo_store.access import (
    ACTION_TRACKER,
    BUILTIN_ROLES,
    EVENT_NOTARY,
    STEWARD,
    Actor,
    OpClass,
    Permission,
    Role,
    check,
    is_steward,
    parse_roles_document,
    readable_domains,
    roles_document,
)
from cdo_store.errors import InvalidValue
from cdo_store.model import Domain

from helpers import ALL_PERMISSIONS

permissions = st.sampled_from(ALL_PERMISSIONS)
role_sets = st.lists(st.frozensets(permissions, max_size=5), max_size=3)


@given(role_sets, st.sampled_from(list(OpClass)), st.sampled_from(list(Domain)))
def test_allowed_iff_some_role_grants(grant_sets, op, domain):
    roles = {f"r{i}": Role(f"r{i}", g) for i, g in enumerate(grant_sets)}
    actor = Actor("u", frozenset(roles))
    decision = check(actor, op, domain, roles)
    granted = any((domain, op) == (p.domain, p.op_class) for g in grant_sets for p in g)
    assert decision.allowed == granted
    if not granted:
        assert decision.reason == "default-deny"


def test_unknown_actor_and_unknown_role_deny():
    assert not check(None, OpClass.READ, Domain.OBJECT, BUILTIN_ROLES)
    ghost = Actor("u", frozenset({"missing"}))
    assert not check(ghost, OpClass.READ, Domain.OBJECT, BUILTIN_ROLES)


def test_builtin_role_grants():
    assert EVENT_NOTARY.grants == {Permission(Domain.EVENT, OpClass.APPEND), Permission(Domain.EVENT, OpClass.READ)}
    assert ACTION_TRACKER.grants == {Permission(Domain.ACTION, OpClass.READ), Permission(Domain.EVENT, OpClass.READ)}
    assert STEWARD.grants == set(ALL_PERMISSIONS)


def test_append_only_applies_to_events():
    with pytest.raises(InvalidValue):
        Permission(Domain.OBJECT, OpClass.APPEND)
    steward = Actor("s", frozenset({"steward"}))
    for domain in Domain:
        assert check(steward, OpClass.APPEND, domain, BUILTIN_ROLES).allowed == (domain is Domain.EVENT)


def test_permission_parse():
    assert Permission.parse("event:Append") == Permission(Domain.EVENT, OpClass.APPEND)
    with pytest.raises(InvalidValue):
        Permission.parse("Event")
    with pytest.raises(InvalidValue):
        Permission.parse("Event:delete")


def test_steward_and_readable_domains():
    tracker = Actor("t", frozenset({"action-tracker"}))
    assert not is_steward(tracker)
    assert is_steward(Actor("s", frozenset({"steward"})))
    assert readable_domains(tracker, BUILTIN_ROLES) == {Domain.ACTION, Domain.EVENT}


@given(role_sets)
def test_roles_document_round_trip(grant_sets):
    roles = [Role(f"r{i}", g) for i, g in enumerate(grant_sets)]
    actors = [Actor("a", frozenset(r.name for r in roles)), Actor("b")]
    back_roles, back_actors = parse_roles_document(roles_document(roles, actors))
    assert back_roles == sorted(roles, key=lambda r: r.name)
    assert back_actors == actors

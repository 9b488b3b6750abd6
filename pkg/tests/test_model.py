from __future__ import annotations

import itertools
from datetime import datetime

import pytest
from hypothesis import given, strategies as st

from cdo_store.errors import InvalidId, InvalidValue, SameDomainPair
from cdo_store.model import (
    Correlation,
    CorrelationKind,
    CrossDomainClass,
    Domain,
    Entity,
    EntityId,
    classify_cross_domain,
    correlation_kind_for,
)

namespaces = st.one_of(st.just(""), st.from_regex(r"[A-Za-z][A-Za-z0-9_.-]{0,8}", fullmatch=True))
local_names = st.text(
    st.characters(blacklist_characters=':<>"', blacklist_categories=("Z", "C")), min_size=1, max_size=12
)


@given(namespaces, local_names)
def test_curie_round_trip(ns, local):
    eid = EntityId(ns, local)
    assert EntityId.parse(eid.render()) == eid


@pytest.mark.parametrize("text", ["apple", ":", "ex:a b", "ex:a:b", "1x:a", 'ex:"a"', ""])
def test_bad_curies(text):
    with pytest.raises(InvalidId):
        EntityId.parse(text)


def test_reserved_namespaces():
    assert EntityId("evt", "1").reserved
    assert not EntityId("ex", "1").reserved


def test_domain_parse_is_case_insensitive():
    assert Domain.parse("object") is Domain.OBJECT
    assert Domain.parse("ACTION") is Domain.ACTION
    with pytest.raises(InvalidValue):
        Domain.parse("Thing")


@given(st.sampled_from(list(Domain)), st.sampled_from(list(Domain)))
def test_kind_is_symmetric_and_total_off_diagonal(d1, d2):
    if d1 is d2:
        with pytest.raises(SameDomainPair):
            correlation_kind_for(d1, d2)
    else:
        assert correlation_kind_for(d1, d2) is correlation_kind_for(d2, d1)


def test_each_kind_joins_exactly_one_pair():
    pairs = [frozenset(p) for p in itertools.combinations(Domain, 2)]
    kinds = [correlation_kind_for(*sorted(p, key=lambda d: d.rank)) for p in pairs]
    assert sorted(k.value for k in kinds) == sorted(k.value for k in CorrelationKind)


@given(st.sampled_from(list(Domain)), st.sampled_from(list(Domain)))
def test_between_normalizes_endpoint_order(d1, d2):
    if d1 is d2:
        return
    x = Entity(EntityId("", "x"), d1)
    y = Entity(EntityId("", "y"), d2)
    c1 = Correlation.between(EntityId("cor", "1"), x, y)
    c2 = Correlation.between(EntityId("cor", "1"), y, x)
    assert c1 == c2
    low = x if d1.rank < d2.rank else y
    assert c1.a == low.id
    assert c1.other(c1.a) == c1.b


def test_cross_domain_classes():
    def corr(kind):
        return Correlation(EntityId("cor", "1"), kind, EntityId("", "a"), EntityId("", "b"))

    assert classify_cross_domain(corr(CorrelationKind.SCHEME)) is CrossDomainClass.CONSENSUAL_SCHEME
    assert classify_cross_domain(corr(CorrelationKind.REASON)) is CrossDomainClass.SOVEREIGN_REASON
    for kind in set(CorrelationKind) - {CorrelationKind.SCHEME, CorrelationKind.REASON}:
        assert classify_cross_domain(corr(kind)) is CrossDomainClass.NONE


def test_entity_validation():
    e = Entity(EntityId("", "a"), Domain.OBJECT, {"en": "A", "pt-BR": "A"}, {"n": 1})
    assert e.attributes == {"n": 1}
    with pytest.raises(InvalidValue):
        Entity(EntityId("", "a"), Domain.OBJECT, {"not a tag": "x"})
    with pytest.raises(InvalidValue):
        Entity(EntityId("", "a"), Domain.OBJECT, {}, {"f": 1.5})
    with pytest.raises(InvalidValue):
        Entity(EntityId("", "a"), Domain.OBJECT, {}, {"bad key": 1})
    with pytest.raises(InvalidValue):
        Entity(EntityId("", "a"), Domain.OBJECT, {}, {"t": datetime(2024, 1, 1)})


def test_self_correlation_rejected():
    with pytest.raises(SameDomainPair):
        Correlation(EntityId("cor", "1"), CorrelationKind.SCHEME, EntityId("", "a"), EntityId("", "a"))

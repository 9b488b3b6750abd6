from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from cdo_store.errors import CycleDetected, NoMatch, NotMapped, ParseError
from cdo_store.mapping import (
    ConceptHierarchy,
    Mapping,
    MappingKind,
    classify_match,
    parse_vocabulary_lines,
    translate,
    vocabulary_line,
)
from cdo_store.model import EntityId

N = 7
NODES = [EntityId("", f"c{i}") for i in range(N)]

# edges only from lower to higher index, so every draw is a DAG
dags = st.sets(
    st.tuples(st.integers(0, N - 1), st.integers(0, N - 1)).filter(lambda e: e[0] < e[1]),
    max_size=12,
).map(lambda edges: ConceptHierarchy((NODES[p], NODES[c]) for p, c in edges))


def closure(h: ConceptHierarchy) -> set[tuple[EntityId, EntityId]]:
    reach = {(p, c) for p, c in h.edges()}
    while True:
        extra = {(a, d) for a, b in reach for c, d in reach if b == c} - reach
        if not extra:
            return reach
        reach |= extra


@given(dags)
def test_ancestors_and_descendants_match_closure(h):
    reach = closure(h)
    for n in NODES:
        assert h.ancestors(n) == {a for a, b in reach if b == n}
        assert h.descendants(n) == {b for a, b in reach if a == n}


@given(dags, st.sampled_from(NODES), st.sampled_from(NODES))
def test_classification_is_consistent_under_swap(h, x, y):
    def kind(a, b):
        try:
            return classify_match(h, a, b)
        except NoMatch:
            return None

    forward, backward = kind(x, y), kind(y, x)
    flip = {
        MappingKind.BROADER: MappingKind.NARROWER,
        MappingKind.NARROWER: MappingKind.BROADER,
        MappingKind.EQUIVALENT: MappingKind.EQUIVALENT,
        MappingKind.PARTIAL: MappingKind.PARTIAL,
        None: None,
    }
    assert backward is flip[forward]
    assert (forward is MappingKind.EQUIVALENT) == (x == y)


@given(dags, st.sampled_from(NODES), st.sampled_from(NODES))
def test_adding_an_edge_keeps_the_graph_acyclic(h, p, c):
    if h.would_cycle(p, c):
        with pytest.raises(CycleDetected):
            h.add(p, c)
    else:
        h.add(p, c)
    order = h.topological_order()
    position = {n: i for i, n in enumerate(order)}
    assert all(position[a] < position[b] for a, b in h.edges())


def test_cycle_and_self_loop_rejected():
    a, b, c = NODES[:3]
    h = ConceptHierarchy([(a, b), (b, c)])
    with pytest.raises(CycleDetected):
        h.add(c, a)
    with pytest.raises(CycleDetected):
        h.add(a, a)


def test_partial_needs_a_shared_descendant():
    fruit, red, fuji, stone = (EntityId("", n) for n in ("fruit", "red", "fuji", "stone"))
    h = ConceptHierarchy([(fruit, fuji), (red, fuji)])
    assert classify_match(h, red, fruit) is MappingKind.PARTIAL
    with pytest.raises(NoMatch):
        classify_match(h, stone, fruit)


def _m(i, concept, obj, kind, vocab):
    return Mapping(EntityId("map", str(i)), EntityId("", concept), EntityId("", obj), kind, vocab)


def test_translate_uses_only_equivalent_mappings():
    maps = [
        _m(1, "pomme", "apple", MappingKind.EQUIVALENT, "fr"),
        _m(2, "apfel", "apple", MappingKind.EQUIVALENT, "de"),
        _m(3, "obst", "apple", MappingKind.BROADER, "de"),
        _m(4, "fruit_fr", "apple", MappingKind.BROADER, "fr"),
    ]
    assert translate(maps, EntityId("", "pomme"), "de") == {EntityId("", "apfel")}
    assert translate(maps, EntityId("", "fruit_fr"), "de") == set()
    assert translate(maps, EntityId("", "pomme"), "es") == set()
    with pytest.raises(NotMapped):
        translate(maps, EntityId("", "nothing"), "de")


def test_vocabulary_lines_round_trip():
    entries = [
        _m(1, "pomme", "apple", MappingKind.EQUIVALENT, "fr"),
        _m(2, "obst", "apple", MappingKind.BROADER, "de"),
    ]
    lines = [vocabulary_line(e) for e in entries] + [""]
    parsed = list(parse_vocabulary_lines(lines))
    assert [(p.concept, p.object, p.kind, p.vocabulary) for p in parsed] == [
        (e.concept, e.object, e.kind, e.vocabulary) for e in entries
    ]


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        '{"concept": ":a", "object": ":b", "kind": "equivalent"}',
        '{"concept": ":a", "object": ":b", "kind": "sideways", "vocabulary": "fr"}',
        '{"concept": "a", "object": ":b", "kind": "equivalent", "vocabulary": "fr"}',
    ],
)
def test_bad_vocabulary_lines_report_line_numbers(line):
    good = '{"concept": ":a", "object": ":b", "kind": "equivalent", "vocabulary": "fr"}'
    with pytest.raises(ParseError) as info:
        list(parse_vocabulary_lines([good, line]))
    assert info.value.line == 2

"""Concept-to-object alignment over a broader-than concept hierarchy."""

from __future__ import annotations

import json
from collections import deque
from collections import abc
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from enum import Enum

from .canonical import encode_record
from .errors import CycleDetected, InvalidValue, NoMatch, NotMapped, ParseError
from .model import EntityId, validate_key


class MappingKind(str, Enum):
    EQUIVALENT = "equivalent"
    BROADER = "broader"
    NARROWER = "narrower"
    PARTIAL = "partial"

    @classmethod
    def parse(cls, text: str | MappingKind) -> MappingKind:
        if isinstance(text, MappingKind):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise InvalidValue(f"unknown mapping kind {text!r}") from None


@dataclass(frozen=True)
class Mapping:
    id: EntityId
    concept: EntityId
    object: EntityId
    kind: MappingKind
    vocabulary: str

    def __post_init__(self) -> None:
        validate_key(self.vocabulary, "vocabulary tag")

    @property
    def key(self) -> tuple[EntityId, EntityId, str]:
        return (self.concept, self.object, self.vocabulary)

    def canonical(self) -> bytes:
        return encode_record(
            "mapping", self.id, self.concept, self.object, self.kind.value, self.vocabulary
        )


class ConceptHierarchy:
    """Broader-than DAG: an edge ``(parent, child)`` means parent is broader."""

    def __init__(self, edges: Iterable[tuple[EntityId, EntityId]] = ()):
        self._children: dict[EntityId, set[EntityId]] = {}
        self._parents: dict[EntityId, set[EntityId]] = {}
        for parent, child in edges:
            self._link(parent, child)

    def _link(self, parent: EntityId, child: EntityId) -> None:
        self._children.setdefault(parent, set()).add(child)
        self._parents.setdefault(child, set()).add(parent)

    def copy(self) -> ConceptHierarchy:
        return ConceptHierarchy(self.edges())

    def __contains__(self, node: object) -> bool:
        return node in self._children or node in self._parents

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConceptHierarchy) and self.edges() == other.edges()

    def __len__(self) -> int:
        return sum(len(c) for c in self._children.values())

    def edges(self) -> list[tuple[EntityId, EntityId]]:
        return sorted(
            ((p, c) for p, cs in self._children.items() for c in cs),
            key=lambda e: (e[0].render(), e[1].render()),
        )

    def has_edge(self, parent: EntityId, child: EntityId) -> bool:
        return child in self._children.get(parent, ())

    def parents(self, node: EntityId) -> frozenset[EntityId]:
        return frozenset(self._parents.get(node, ()))

    def children(self, node: EntityId) -> frozenset[EntityId]:
        return frozenset(self._children.get(node, ()))

    def nodes(self) -> set[EntityId]:
        return set(self._children) | set(self._parents)

    def is_referenced(self, node: EntityId) -> bool:
        return bool(self._children.get(node)) or bool(self._parents.get(node))

    def _reach(self, start: EntityId, step: dict[EntityId, set[EntityId]]) -> set[EntityId]:
        seen: set[EntityId] = set()
        queue = deque(step.get(start, ()))
        while queue:
            node = queue.popleft()
            if node in seen:
                continue
            seen.add(node)
            queue.extend(step.get(node, ()))
        return seen

    def ancestors(self, node: EntityId) -> set[EntityId]:
        """Strict ancestors (everything broader than ``node``)."""
        return self._reach(node, self._parents)

    def descendants(self, node: EntityId) -> set[EntityId]:
        """Strict descendants (everything narrower than ``node``)."""
        return self._reach(node, self._children)

    def would_cycle(self, parent: EntityId, child: EntityId) -> bool:
        return parent == child or parent in self.descendants(child)

    def add(self, parent: EntityId, child: EntityId) -> None:
        if self.would_cycle(parent, child):
            raise CycleDetected(f"{parent} broader than {child} would close a cycle")
        self._link(parent, child)

    def topological_order(self) -> list[EntityId]:
        indegree = {n: len(self._parents.get(n, ())) for n in self.nodes()}
        ready = sorted((n for n, d in indegree.items() if d == 0), key=EntityId.render)
        order: list[EntityId] = []
        while ready:
            node = ready.pop()
            order.append(node)
            for child in sorted(self._children.get(node, ()), key=EntityId.render):
                indegree[child] -= 1
                if indegree[child] == 0:
                    ready.append(child)
        if len(order) != len(indegree):
            raise CycleDetected("hierarchy contains a cycle")
        return order


def classify_match(hierarchy: ConceptHierarchy, local: EntityId, anchor: EntityId) -> MappingKind:
    """Relate a local concept to an object's anchor concept.

    Raises NoMatch when the two share neither ancestry nor a descendant.
    """
    if local == anchor:
        return MappingKind.EQUIVALENT
    anchor_ancestors = hierarchy.ancestors(anchor)
    if local in anchor_ancestors:
        return MappingKind.BROADER
    anchor_descendants = hierarchy.descendants(anchor)
    if local in anchor_descendants:
        return MappingKind.NARROWER
    if hierarchy.descendants(local) & anchor_descendants:
        return MappingKind.PARTIAL
    raise NoMatch(f"{local} and {anchor} are unrelated in the concept hierarchy")


def translate(
    mappings: Iterable[Mapping], term: EntityId, target_vocabulary: str
) -> set[EntityId]:
    """Concepts in ``target_vocabulary`` sharing an Equivalent pivot object with ``term``.

    Only Equivalent mappings translate; broader/narrower/partial never do.
    """
    mappings = list(mappings)
    own = [m for m in mappings if m.concept == term]
    if not own:
        raise NotMapped(f"{term} has no mappings")
    pivots = {m.object for m in own if m.kind is MappingKind.EQUIVALENT}
    return {
        m.concept
        for m in mappings
        if m.object in pivots
        and m.kind is MappingKind.EQUIVALENT
        and m.vocabulary == target_vocabulary
    }


@dataclass(frozen=True)
class VocabularyEntry:
    concept: EntityId
    object: EntityId
    kind: MappingKind
    vocabulary: str


def parse_vocabulary_lines(lines: Iterable[str]) -> Iterator[VocabularyEntry]:
    """Vocabulary import (JSON Lines, one mapping per line)."""
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            if not isinstance(doc, abc.Mapping) or set(doc) != {"concept", "object", "kind", "vocabulary"}:
                raise ValueError("expected fields concept, object, kind, vocabulary")
            yield VocabularyEntry(
                EntityId.parse(doc["concept"]),
                EntityId.parse(doc["object"]),
                MappingKind.parse(doc["kind"]),
                validate_key(doc["vocabulary"], "vocabulary tag"),
            )
        except (ValueError, TypeError) as exc:
            raise ParseError(str(exc), line=lineno) from None


def vocabulary_line(entry: VocabularyEntry | Mapping) -> str:
    return json.dumps(
        {
            "concept": entry.concept.render(),
            "object": entry.object.render(),
            "kind": entry.kind.value,
            "vocabulary": entry.vocabulary,
        },
        ensure_ascii=False,
    )

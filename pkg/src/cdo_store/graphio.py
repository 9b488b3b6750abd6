"""Line-oriented triple export and import of the stored graph.

One statement per line, ``SUBJECT PREDICATE OBJECT .``, lines sorted.
Literals are JSON-quoted strings with an optional ``@lang`` or
``^^cdo:<type>`` suffix.  Predicates::

    cdo:domain cdo:<Domain>          cdo:label "text"@lang
    cdo:attr:<key> literal           cdo:anchor <concept>
    cdo:kind cdo:<Kind>              cdo:correlation <endpoint>   (twice)
    cdo:concept <concept>            cdo:mapsTo <object>
    cdo:mappingKind cdo:<Kind>       cdo:vocabulary "tag"
    cdo:broaderThan <child>
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from typing import Optional

from .access import OpClass
from .canonical import format_instant, parse_instant
from .errors import CdoError, DomainConflict, ImportConflict, ParseError
from .mapping import MappingKind
from .model import CorrelationKind, Domain, EntityId, Scalar, correlation_kind_for
from .state import CORRELATION_NAMESPACE, MAPPING_NAMESPACE, State
from .store import Store

ATTR_PREFIX = "cdo:attr:"
_DECODER = json.JSONDecoder()


def _quote(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


def literal(value: Scalar) -> str:
    if isinstance(value, bool):
        return f'"{"true" if value else "false"}"^^cdo:boolean'
    if isinstance(value, int):
        return f'"{value}"^^cdo:integer'
    if isinstance(value, Decimal):
        return f'"{value}"^^cdo:decimal'
    if isinstance(value, datetime):
        return f'"{format_instant(value)}"^^cdo:timestamp'
    return _quote(value)


def _typed(text: str, datatype: str) -> Scalar:
    if datatype == "cdo:boolean" and text in ("true", "false"):
        return text == "true"
    if datatype == "cdo:integer":
        return int(text)
    if datatype == "cdo:decimal":
        value = Decimal(text)
        if not value.is_finite():
            raise ValueError(f"non-finite decimal {text!r}")
        return value
    if datatype == "cdo:timestamp":
        return parse_instant(text)
    raise ValueError(f"unknown literal {text!r}^^{datatype}")


def _kind_name(kind: MappingKind) -> str:
    return "cdo:" + kind.value.capitalize()


def export_graph(state: State) -> str:
    """Canonical text for the stored graph (log projections excluded)."""
    entities, correlations, mappings, edges, anchors = state.content()
    lines: list[str] = []
    for entity in entities:
        sid = entity.id.render()
        lines.append(f"{sid} cdo:domain cdo:{entity.domain.value} .")
        for tag, text in entity.labels.items():
            lines.append(f"{sid} cdo:label {_quote(text)}@{tag} .")
        for key, value in entity.attributes.items():
            lines.append(f"{sid} {ATTR_PREFIX}{key} {literal(value)} .")
    for corr in correlations:
        cid = corr.id.render()
        lines.append(f"{cid} cdo:kind cdo:{corr.kind.value} .")
        lines.append(f"{cid} cdo:correlation {corr.a.render()} .")
        lines.append(f"{cid} cdo:correlation {corr.b.render()} .")
        for key, value in corr.attributes.items():
            lines.append(f"{cid} {ATTR_PREFIX}{key} {literal(value)} .")
    for m in mappings:
        mid = m.id.render()
        lines.append(f"{mid} cdo:concept {m.concept.render()} .")
        lines.append(f"{mid} cdo:mapsTo {m.object.render()} .")
        lines.append(f"{mid} cdo:mappingKind {_kind_name(m.kind)} .")
        lines.append(f"{mid} cdo:vocabulary {_quote(m.vocabulary)} .")
    for parent, child in edges:
        lines.append(f"{parent.render()} cdo:broaderThan {child.render()} .")
    for obj, concept in anchors:
        lines.append(f"{obj.render()} cdo:anchor {concept.render()} .")
    lines.sort()
    return "".join(line + "\n" for line in lines)


# -- parsing ------------------------------------------------------------------

@dataclass
class _EntityDecl:
    line: int
    domain: Optional[Domain] = None
    labels: dict[str, str] = field(default_factory=dict)
    attributes: dict[str, Scalar] = field(default_factory=dict)


@dataclass
class _CorrelationDecl:
    line: int
    kind: Optional[CorrelationKind] = None
    endpoints: list[EntityId] = field(default_factory=list)
    attributes: dict[str, Scalar] = field(default_factory=dict)


@dataclass
class _MappingDecl:
    line: int
    concept: Optional[EntityId] = None
    object: Optional[EntityId] = None
    kind: Optional[MappingKind] = None
    vocabulary: Optional[str] = None


@dataclass
class GraphDocument:
    entities: dict[EntityId, _EntityDecl] = field(default_factory=dict)
    correlations: dict[EntityId, _CorrelationDecl] = field(default_factory=dict)
    mappings: dict[EntityId, _MappingDecl] = field(default_factory=dict)
    edges: list[tuple[EntityId, EntityId, int]] = field(default_factory=list)
    anchors: list[tuple[EntityId, EntityId, int]] = field(default_factory=list)
    references: list[tuple[EntityId, int]] = field(default_factory=list)


def _split(line: str) -> tuple[str, str, str]:
    body = line.rstrip()
    if not body.endswith(" ."):
        raise ValueError("statement must end with ' .'")
    body = body[:-2].rstrip()
    parts = body.split(" ", 2)
    if len(parts) != 3 or not all(parts):
        raise ValueError("expected SUBJECT PREDICATE OBJECT")
    return parts[0], parts[1], parts[2]


def _read_literal(text: str) -> tuple[str, str]:
    """Return ``(string, suffix)`` where suffix is ``''``, ``@lang`` or ``^^type``."""
    if not text.startswith('"'):
        raise ValueError(f"expected a literal, got {text!r}")
    value, end = _DECODER.raw_decode(text)
    if not isinstance(value, str):
        raise ValueError(f"expected a quoted string, got {text!r}")
    return value, text[end:]


def _read_value(text: str) -> Scalar:
    value, suffix = _read_literal(text)
    if not suffix:
        return value
    if suffix.startswith("^^"):
        return _typed(value, suffix[2:])
    raise ValueError(f"unexpected literal suffix {suffix!r}")


def _enum_term(text: str, what: str) -> str:
    if not text.startswith("cdo:"):
        raise ValueError(f"expected cdo:<{what}>, got {text!r}")
    return text[4:]


def parse_graph(text: str) -> GraphDocument:
    doc = GraphDocument()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        try:
            _parse_statement(doc, raw, lineno)
        except (ParseError, DomainConflict):
            raise
        except (CdoError, ValueError, InvalidOperation) as exc:
            raise ParseError(str(exc), line=lineno) from None
    for cid, decl in doc.correlations.items():
        if decl.kind is None or len(decl.endpoints) != 2:
            raise ParseError(f"{cid} needs one cdo:kind and two cdo:correlation", line=decl.line)
    for mid, decl in doc.mappings.items():
        if None in (decl.concept, decl.object, decl.kind, decl.vocabulary):
            raise ParseError(f"{mid} is missing mapping fields", line=decl.line)
    for eid, decl in doc.entities.items():
        if decl.domain is None:
            raise ParseError(f"{eid} has no cdo:domain statement", line=decl.line)
    return doc


def _parse_statement(doc: GraphDocument, raw: str, lineno: int) -> None:
    subj_text, pred, obj_text = _split(raw)
    subject = EntityId.parse(subj_text)

    def ref(text: str) -> EntityId:
        target = EntityId.parse(text)
        doc.references.append((target, lineno))
        return target

    if subject.namespace == CORRELATION_NAMESPACE:
        decl = doc.correlations.setdefault(subject, _CorrelationDecl(lineno))
        if pred == "cdo:kind":
            if decl.kind is not None:
                raise ValueError(f"{subject} has two kinds")
            decl.kind = CorrelationKind.parse(_enum_term(obj_text, "Kind"))
        elif pred == "cdo:correlation":
            if len(decl.endpoints) == 2:
                raise ValueError(f"{subject} has more than two endpoints")
            decl.endpoints.append(ref(obj_text))
        elif pred.startswith(ATTR_PREFIX):
            decl.attributes[pred[len(ATTR_PREFIX):]] = _read_value(obj_text)
        else:
            raise ValueError(f"predicate {pred} does not apply to correlations")
        return
    if subject.namespace == MAPPING_NAMESPACE:
        decl = doc.mappings.setdefault(subject, _MappingDecl(lineno))
        if pred == "cdo:concept" and decl.concept is None:
            decl.concept = ref(obj_text)
        elif pred == "cdo:mapsTo" and decl.object is None:
            decl.object = ref(obj_text)
        elif pred == "cdo:mappingKind" and decl.kind is None:
            decl.kind = MappingKind.parse(_enum_term(obj_text, "MappingKind"))
        elif pred == "cdo:vocabulary" and decl.vocabulary is None:
            decl.vocabulary = _read_value(obj_text)
        else:
            raise ValueError(f"unexpected or repeated predicate {pred} on {subject}")
        return
    if pred == "cdo:broaderThan":
        doc.references.append((subject, lineno))
        doc.edges.append((subject, ref(obj_text), lineno))
        return
    if pred == "cdo:anchor":
        doc.references.append((subject, lineno))
        doc.anchors.append((subject, ref(obj_text), lineno))
        return
    decl = doc.entities.setdefault(subject, _EntityDecl(lineno))
    if pred == "cdo:domain":
        domain = Domain.parse(_enum_term(obj_text, "Domain"))
        if decl.domain is not None and decl.domain is not domain:
            raise DomainConflict(f"{subject} declared as {decl.domain.value} and {domain.value}")
        decl.domain = domain
    elif pred == "cdo:label":
        text, suffix = _read_literal(obj_text)
        if not suffix.startswith("@"):
            raise ValueError("labels need a @lang suffix")
        decl.labels[suffix[1:]] = text
    elif pred.startswith(ATTR_PREFIX):
        decl.attributes[pred[len(ATTR_PREFIX):]] = _read_value(obj_text)
    else:
        raise ValueError(f"unknown predicate {pred}")


# -- import -------------------------------------------------------------------

@dataclass(frozen=True)
class ImportDelta:
    entities_created: int = 0
    entities_updated: int = 0
    correlations: int = 0
    mappings: int = 0
    edges: int = 0
    anchors: int = 0

    def to_json(self) -> dict[str, int]:
        return dict(self.__dict__)


def import_graph(store: Store, text: str, actor: str) -> ImportDelta:
    """Merge an exported document into ``store`` as ``actor``.

    Everything is parsed and checked (domains, conflicts, permissions)
    before the first write; each created item is then logged as usual.
    """
    doc = parse_graph(text)
    state = store.state_copy()

    def domain_of(eid: EntityId, line: int) -> Domain:
        decl = doc.entities.get(eid)
        if decl is not None:
            return decl.domain
        existing = state.entities.get(eid)
        if existing is None:
            raise ParseError(f"{eid} is referenced but never declared", line=line)
        return existing.domain

    needs: set[tuple[OpClass, Domain]] = set()
    creates, updates = [], []
    for eid, decl in sorted(doc.entities.items(), key=lambda kv: kv[0].render()):
        existing = state.entities.get(eid)
        if existing is None:
            creates.append((eid, decl))
        elif existing.domain is not decl.domain:
            raise DomainConflict(
                f"{eid} is {existing.domain.value} in the store but {decl.domain.value} in the document"
            )
        elif existing.labels != decl.labels or existing.attributes != decl.attributes:
            updates.append((eid, decl))
        else:
            continue
        needs.add((OpClass.WRITE, decl.domain))
    for eid, line in doc.references:
        domain_of(eid, line)

    links = []
    for cid, decl in sorted(doc.correlations.items(), key=lambda kv: kv[0].render()):
        a, b = decl.endpoints
        da, db = domain_of(a, decl.line), domain_of(b, decl.line)
        try:
            derived = correlation_kind_for(da, db)
        except CdoError as exc:
            raise ParseError(str(exc), line=decl.line) from None
        if derived is not decl.kind:
            raise ParseError(f"{cid} is declared {decl.kind.value} but joins {da.value}/{db.value}", line=decl.line)
        existing = state.correlations.get(cid)
        if existing is not None:
            if {existing.a, existing.b} != {a, b} or existing.attributes != decl.attributes:
                raise ImportConflict(f"{cid} already exists with different content")
            continue
        links.append((cid, decl))
        needs.update({(OpClass.WRITE, da), (OpClass.WRITE, db)})

    maps = []
    for mid, decl in sorted(doc.mappings.items(), key=lambda kv: kv[0].render()):
        if domain_of(decl.concept, decl.line) is not Domain.CONCEPT or domain_of(decl.object, decl.line) is not Domain.OBJECT:
            raise ParseError(f"{mid} must map a Concept to an Object", line=decl.line)
        existing = state.mappings.get(mid)
        if existing is not None:
            if existing.key != (decl.concept, decl.object, decl.vocabulary) or existing.kind is not decl.kind:
                raise ImportConflict(f"{mid} already exists with different content")
            continue
        maps.append((mid, decl))
        needs.update({(OpClass.WRITE, Domain.CONCEPT), (OpClass.WRITE, Domain.OBJECT)})

    hierarchy = state.hierarchy.copy()
    edges = []
    for parent, child, line in doc.edges:
        if domain_of(parent, line) is not Domain.CONCEPT or domain_of(child, line) is not Domain.CONCEPT:
            raise ParseError("cdo:broaderThan relates two Concepts", line=line)
        if hierarchy.has_edge(parent, child):
            continue
        try:
            hierarchy.add(parent, child)
        except CdoError as exc:
            raise ParseError(str(exc), line=line) from None
        edges.append((parent, child))
        needs.add((OpClass.WRITE, Domain.CONCEPT))

    anchors = []
    for obj, concept, line in doc.anchors:
        if domain_of(obj, line) is not Domain.OBJECT or domain_of(concept, line) is not Domain.CONCEPT:
            raise ParseError("cdo:anchor relates an Object to a Concept", line=line)
        current = state.anchors.get(obj)
        if current == concept:
            continue
        if current is not None:
            raise ImportConflict(f"{obj} is already anchored at {current}")
        anchors.append((obj, concept))
        needs.update({(OpClass.WRITE, Domain.OBJECT), (OpClass.WRITE, Domain.CONCEPT)})

    store.authorize(actor, "import_graph", sorted(needs, key=lambda n: (n[1].rank, n[0].value)))

    for eid, decl in creates:
        store.create_entity(actor, eid, decl.domain, decl.labels, decl.attributes)
    for eid, decl in updates:
        store.update_entity(actor, eid, decl.labels, decl.attributes)
    for cid, decl in links:
        store.link(actor, decl.endpoints[0], decl.endpoints[1], decl.attributes, correlation_id=cid)
    for mid, decl in maps:
        store.map_concept(actor, decl.concept, decl.object, decl.vocabulary, decl.kind, mapping_id=mid)
    for parent, child in edges:
        store.add_broader(actor, parent, child)
    for obj, concept in anchors:
        store.set_anchor(actor, obj, concept)
    return ImportDelta(len(creates), len(updates), len(links), len(maps), len(edges), len(anchors))


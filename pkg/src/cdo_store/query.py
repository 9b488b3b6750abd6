"""Conjunctive pattern queries, traversal, and competency questions.

A pattern is either an edge pattern ``(subject, kind, object)`` matched
against correlations in their stored orientation (lower-ranked domain
first), or a node pattern ``(subject)`` matched against entities.  Several
patterns are joined on shared variable names with nested loops.
"""

from __future__ import annotations

import json
import shlex
from collections import deque
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .canonical import scalar_from_json, scalar_to_json
from .errors import DuplicateName, InvalidValue, ParseError, UnboundedQuery, UnknownEntity
from .model import KIND_DOMAINS, CorrelationKind, Domain, EntityId, Scalar, validate_scalar
from .state import View


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self) -> None:
        if not self.name or not all(ch.isalnum() or ch == "_" for ch in self.name):
            raise InvalidValue(f"bad variable name {self.name!r}")

    def __str__(self) -> str:
        return f"?{self.name}"


Term = Union[EntityId, Var]


def parse_term(text: str) -> Term:
    if text.startswith("?"):
        return Var(text[1:])
    return EntityId.parse(text)


def _term_json(term: Term) -> str:
    return str(term) if isinstance(term, Var) else term.render()


@dataclass(frozen=True)
class Pattern:
    """One conjunct.  ``object=None`` makes it a node pattern.

    ``all_entities`` permits a pattern with nothing bound and no filter
    (a deliberate full scan).
    """

    subject: Term
    kind: Optional[CorrelationKind] = None
    object: Optional[Term] = None
    domains: Mapping[str, Domain] = field(default_factory=dict)
    attributes: Mapping[tuple[str, str], Scalar] = field(default_factory=dict)
    all_entities: bool = False

    def __post_init__(self) -> None:
        if self.object is None and self.kind is not None:
            raise InvalidValue("a kind filter needs an object term")
        for value in self.attributes.values():
            validate_scalar(value)

    def __hash__(self) -> int:
        return hash((self.subject, self.kind, self.object))

    @property
    def is_edge(self) -> bool:
        return self.object is not None

    def variables(self) -> list[str]:
        terms = [self.subject] + ([self.object] if self.object is not None else [])
        return [t.name for t in terms if isinstance(t, Var)]

    def implied_domains(self) -> dict[str, Domain]:
        """Domain constraints: explicit filters plus those a kind filter implies."""
        implied: dict[str, Domain] = {}
        if self.kind is not None:
            low, high = sorted(KIND_DOMAINS[self.kind], key=lambda d: d.rank)
            if isinstance(self.subject, Var):
                implied[self.subject.name] = low
            if isinstance(self.object, Var):
                implied[self.object.name] = high
        implied.update(self.domains)
        return implied

    def is_bounded(self, bound: Iterable[str] = ()) -> bool:
        bound = set(bound)
        terms = [self.subject] + ([self.object] if self.object is not None else [])
        if any(isinstance(t, EntityId) or t.name in bound for t in terms):
            return True
        return self.all_entities or bool(self.implied_domains())

    def to_json(self) -> dict[str, object]:
        doc: dict[str, object] = {"subject": _term_json(self.subject)}
        if self.object is not None:
            doc["kind"] = self.kind.value if self.kind else None
            doc["object"] = _term_json(self.object)
        if self.domains:
            doc["domains"] = {v: d.value for v, d in sorted(self.domains.items())}
        if self.attributes:
            doc["attributes"] = [
                {"var": v, "key": k, "value": scalar_to_json(val)}
                for (v, k), val in sorted(self.attributes.items())
            ]
        if self.all_entities:
            doc["all"] = True
        return doc

    @classmethod
    def from_json(cls, doc: Mapping[str, object]) -> Pattern:
        kind = doc.get("kind")
        obj = doc.get("object")
        return cls(
            parse_term(str(doc["subject"])),
            CorrelationKind.parse(kind) if kind else None,
            parse_term(str(obj)) if obj is not None else None,
            {str(v): Domain.parse(d) for v, d in dict(doc.get("domains", {})).items()},
            {
                (str(a["var"]), str(a["key"])): scalar_from_json(a["value"])
                for a in doc.get("attributes", [])
            },
            bool(doc.get("all", False)),
        )


def _solution_key(variables: Sequence[str], solution: Mapping[str, EntityId]) -> tuple[str, ...]:
    return tuple(solution[v].render() if v in solution else "" for v in variables)


@dataclass(frozen=True)
class BindingSet:
    """Distinct solutions in deterministic order (rendered ids, by variable name)."""

    variables: tuple[str, ...]
    rows: tuple[tuple[tuple[str, EntityId], ...], ...]

    @classmethod
    def of(
        cls, solutions: Iterable[Mapping[str, EntityId]], variables: Optional[Sequence[str]] = None
    ) -> BindingSet:
        solutions = [dict(s) for s in solutions]
        names = sorted(variables if variables is not None else {k for s in solutions for k in s})
        unique = {_solution_key(names, s): s for s in solutions}
        rows = tuple(
            tuple((v, unique[key][v]) for v in names if v in unique[key]) for key in sorted(unique)
        )
        return cls(tuple(names), rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[dict[str, EntityId]]:
        return (dict(row) for row in self.rows)

    def __contains__(self, solution: object) -> bool:
        return isinstance(solution, Mapping) and tuple(sorted(solution.items())) in set(self.rows)

    def project(self, variables: Sequence[str]) -> BindingSet:
        return BindingSet.of(({v: s[v] for v in variables if v in s} for s in self), variables)

    def values(self, variable: str) -> set[EntityId]:
        return {s[variable] for s in self if variable in s}

    def to_json(self) -> list[dict[str, str]]:
        return [{v: eid.render() for v, eid in row} for row in self.rows]

    @classmethod
    def from_json(cls, doc: Iterable[Mapping[str, str]]) -> BindingSet:
        return cls.of({v: EntityId.parse(i) for v, i in row.items()} for row in doc)

    def serialize(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()


# -- evaluation ---------------------------------------------------------------

def _bind(solution: dict[str, EntityId], term: Term, value: EntityId) -> Optional[dict[str, EntityId]]:
    if isinstance(term, EntityId):
        return solution if term == value else None
    current = solution.get(term.name)
    if current is None:
        extended = dict(solution)
        extended[term.name] = value
        return extended
    return solution if current == value else None


def _resolve(solution: Mapping[str, EntityId], term: Term) -> Optional[EntityId]:
    return term if isinstance(term, EntityId) else solution.get(term.name)


def _passes_filters(view: View, pattern: Pattern, solution: Mapping[str, EntityId]) -> bool:
    for var, domain in pattern.domains.items():
        if var in solution:
            entity = view.entity(solution[var])
            if entity is None or entity.domain is not domain:
                return False
    for (var, key), expected in pattern.attributes.items():
        if var in solution:
            entity = view.entity(solution[var])
            if entity is None or key not in entity.attributes:
                return False
            actual = entity.attributes[key]
            if type(actual) is not type(expected) or actual != expected:
                return False
    return True


def _extend(view: View, pattern: Pattern, solution: dict[str, EntityId]) -> Iterator[dict[str, EntityId]]:
    subject = _resolve(solution, pattern.subject)
    if not pattern.is_edge:
        if subject is not None:
            candidates = [subject] if view.entity(subject) is not None else []
        else:
            wanted = pattern.domains.get(pattern.subject.name)
            candidates = [e.id for e in view.entities() if wanted is None or e.domain is wanted]
        for eid in candidates:
            extended = _bind(solution, pattern.subject, eid)
            if extended is not None and _passes_filters(view, pattern, extended):
                yield extended
        return
    obj = _resolve(solution, pattern.object)
    if subject is not None:
        correlations = [c for c in view.correlations_at(subject) if c.a == subject]
    elif obj is not None:
        correlations = [c for c in view.correlations_at(obj) if c.b == obj]
    else:
        correlations = view.correlations()
    for corr in correlations:
        if pattern.kind is not None and corr.kind is not pattern.kind:
            continue
        extended = _bind(solution, pattern.subject, corr.a)
        if extended is not None:
            extended = _bind(extended, pattern.object, corr.b)
        if extended is not None and _passes_filters(view, pattern, extended):
            yield extended


def check_bounded(patterns: Sequence[Pattern]) -> None:
    bound: set[str] = set()
    for index, pattern in enumerate(patterns):
        if not pattern.is_bounded(bound):
            raise UnboundedQuery(
                f"pattern {index + 1} binds nothing and has no filter; set all to scan everything"
            )
        bound.update(pattern.variables())


def match_pattern(view: View, patterns: Pattern | Sequence[Pattern]) -> BindingSet:
    """Evaluate one pattern, or several joined on shared variables."""
    if isinstance(patterns, Pattern):
        patterns = [patterns]
    patterns = list(patterns)
    check_bounded(patterns)
    variables = sorted({v for p in patterns for v in p.variables()})
    solutions: list[dict[str, EntityId]] = [{}] if patterns else []
    for pattern in patterns:
        solutions = [ext for sol in solutions for ext in _extend(view, pattern, sol)]
        if not solutions:
            break
    return BindingSet.of(solutions, variables)


@dataclass(frozen=True)
class Subgraph:
    entities: frozenset[EntityId]
    correlations: frozenset[EntityId]

    def to_json(self) -> dict[str, list[str]]:
        return {
            "entities": sorted(e.render() for e in self.entities),
            "correlations": sorted(c.render() for c in self.correlations),
        }


def traverse(
    view: View,
    start: EntityId,
    kinds: Optional[Iterable[CorrelationKind]] = None,
    max_depth: int = 1,
) -> Subgraph:
    """Breadth-first closure from ``start`` over correlations of ``kinds``.

    ``kinds=None`` follows every kind.  Depth 0 yields ``start`` alone.
    """
    if view.entity(start) is None:
        raise UnknownEntity(f"no entity {start}")
    if max_depth < 0:
        raise InvalidValue("max_depth must be non-negative")
    allowed = set(CorrelationKind) if kinds is None else set(kinds)
    seen = {start}
    edges: set[EntityId] = set()
    frontier = deque([(start, 0)])
    while frontier:
        node, depth = frontier.popleft()
        if depth == max_depth:
            continue
        for corr in view.correlations_at(node):
            if corr.kind not in allowed:
                continue
            edges.add(corr.id)
            other = corr.other(node)
            if other not in seen:
                seen.add(other)
                frontier.append((other, depth + 1))
    return Subgraph(frozenset(seen), frozenset(edges))


# -- competency questions -----------------------------------------------------

class ExpectKind(str, Enum):
    BINDINGS = "bindings"
    NON_EMPTY = "non-empty"
    COUNT = "count"


@dataclass(frozen=True)
class Expectation:
    kind: ExpectKind
    bindings: Optional[BindingSet] = None
    count: Optional[int] = None

    @classmethod
    def exactly(cls, solutions: Iterable[Mapping[str, EntityId | str]]) -> Expectation:
        rows = [{v: i if isinstance(i, EntityId) else EntityId.parse(i) for v, i in s.items()} for s in solutions]
        return cls(ExpectKind.BINDINGS, bindings=BindingSet.of(rows))

    @classmethod
    def non_empty(cls) -> Expectation:
        return cls(ExpectKind.NON_EMPTY)

    @classmethod
    def count_of(cls, n: int) -> Expectation:
        return cls(ExpectKind.COUNT, count=n)

    def evaluate(self, actual: BindingSet) -> tuple[bool, dict[str, object]]:
        """Return ``(passed, diff)``; the diff is empty when the check passes."""
        if self.kind is ExpectKind.NON_EMPTY:
            return (len(actual) > 0, {} if len(actual) else {"expected": "non-empty", "actual_count": 0})
        if self.kind is ExpectKind.COUNT:
            ok = len(actual) == self.count
            return ok, {} if ok else {"expected_count": self.count, "actual_count": len(actual)}
        expected = {tuple(sorted((v, i.render()) for v, i in s.items())) for s in self.bindings}
        got = {tuple(sorted((v, i.render()) for v, i in s.items())) for s in actual}
        missing = [dict(s) for s in sorted(expected - got)]
        extra = [dict(s) for s in sorted(got - expected)]
        if not missing and not extra:
            return True, {}
        return False, {"missing": missing, "unexpected": extra}

    def describe(self) -> str:
        if self.kind is ExpectKind.NON_EMPTY:
            return "non-empty"
        if self.kind is ExpectKind.COUNT:
            return f"count = {self.count}"
        return f"{len(self.bindings)} binding(s)"

    def to_json(self) -> dict[str, object]:
        if self.kind is ExpectKind.NON_EMPTY:
            return {"non_empty": True}
        if self.kind is ExpectKind.COUNT:
            return {"count": self.count}
        return {"bindings": self.bindings.to_json()}

    @classmethod
    def from_json(cls, doc: Mapping[str, object]) -> Expectation:
        if not isinstance(doc, Mapping) or len(doc) != 1:
            raise InvalidValue("expected must have exactly one of bindings, non_empty, count")
        if "bindings" in doc:
            return cls(ExpectKind.BINDINGS, bindings=BindingSet.from_json(doc["bindings"]))
        if doc.get("non_empty") is True:
            return cls.non_empty()
        if "count" in doc and isinstance(doc["count"], int) and doc["count"] >= 0:
            return cls.count_of(doc["count"])
        raise InvalidValue(f"unrecognized expectation {dict(doc)!r}")


@dataclass(frozen=True)
class CompetencyQuestion:
    name: str
    prose: str
    patterns: tuple[Pattern, ...]
    expected: Expectation
    select: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidValue("competency question needs a name")
        object.__setattr__(self, "patterns", tuple(self.patterns))
        if not self.patterns:
            raise InvalidValue(f"{self.name}: no patterns")
        if self.select is not None:
            object.__setattr__(self, "select", tuple(self.select))

    def run(self, view: View) -> BindingSet:
        result = match_pattern(view, self.patterns)
        return result.project(self.select) if self.select is not None else result

    def to_json(self) -> dict[str, object]:
        doc: dict[str, object] = {
            "name": self.name,
            "prose": self.prose,
            "patterns": [p.to_json() for p in self.patterns],
            "expected": self.expected.to_json(),
        }
        if self.select is not None:
            doc["select"] = list(self.select)
        return doc

    @classmethod
    def from_json(cls, doc: Mapping[str, object]) -> CompetencyQuestion:
        select = doc.get("select")
        return cls(
            str(doc["name"]),
            str(doc.get("prose", "")),
            tuple(Pattern.from_json(p) for p in doc["patterns"]),
            Expectation.from_json(doc["expected"]),
            tuple(select) if select is not None else None,
        )


@dataclass(frozen=True)
class CQResult:
    name: str
    passed: bool
    expected: str
    actual: BindingSet
    diff: Mapping[str, object]
    error: Optional[str] = None

    def to_json(self) -> dict[str, object]:
        return {
            "name": self.name,
            "passed": self.passed,
            "expected": self.expected,
            "actual": self.actual.to_json(),
            "diff": dict(self.diff),
            "error": self.error,
        }


@dataclass(frozen=True)
class CQReport:
    results: tuple[CQResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> CQResult:
        for result in self.results:
            if result.name == name:
                return result
        raise KeyError(name)

    def to_json(self) -> dict[str, object]:
        return {"passed": self.passed, "results": [r.to_json() for r in self.results]}

    def table(self) -> str:
        rows = [("NAME", "STATUS", "EXPECTED", "ACTUAL")]
        for r in self.results:
            rows.append((r.name, "pass" if r.passed else "FAIL", r.expected, f"{len(r.actual)} binding(s)"))
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        for r in self.results:
            if not r.passed:
                detail = r.error or json.dumps(dict(r.diff), sort_keys=True)
                lines.append(f"{r.name}: {detail}")
        passed = sum(r.passed for r in self.results)
        lines.append(f"{passed}/{len(self.results)} passed")
        return "\n".join(lines)


class CQRegistry:
    """Named competency questions, kept in registration order."""

    def __init__(self, cqs: Iterable[CompetencyQuestion] = ()):
        self._cqs: dict[str, CompetencyQuestion] = {}
        for cq in cqs:
            self.register(cq)

    def register(self, cq: CompetencyQuestion) -> CompetencyQuestion:
        if cq.name in self._cqs:
            raise DuplicateName(f"competency question {cq.name!r} already registered")
        self._cqs[cq.name] = cq
        return cq

    def __len__(self) -> int:
        return len(self._cqs)

    def __iter__(self) -> Iterator[CompetencyQuestion]:
        return iter(self._cqs.values())

    def __contains__(self, name: object) -> bool:
        return name in self._cqs

    def get(self, name: str) -> CompetencyQuestion:
        return self._cqs[name]

    def evaluate(self, view: View) -> CQReport:
        return evaluate_cqs(view, self)


def evaluate_cqs(view: View, cqs: Iterable[CompetencyQuestion]) -> CQReport:
    results = []
    for cq in cqs:
        try:
            actual = cq.run(view)
        except (UnboundedQuery, InvalidValue) as exc:
            empty = BindingSet.of([])
            results.append(CQResult(cq.name, False, cq.expected.describe(), empty, {}, str(exc)))
            continue
        passed, diff = cq.expected.evaluate(actual)
        results.append(CQResult(cq.name, passed, cq.expected.describe(), actual, diff))
    return CQReport(tuple(results))


def load_cq_file(text: str) -> list[CompetencyQuestion]:
    """Parse a CQ file: a JSON array of competency-question objects."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, list):
        raise ParseError("CQ file must be a JSON array", line=1)
    out = []
    for index, item in enumerate(doc):
        try:
            out.append(CompetencyQuestion.from_json(item))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidValue(f"CQ #{index + 1}: {exc}") from None
    return out


def dump_cq_file(cqs: Iterable[CompetencyQuestion]) -> str:
    return json.dumps([cq.to_json() for cq in cqs], indent=2, ensure_ascii=False) + "\n"


# -- textual pattern syntax ---------------------------------------------------

def _literal(text: str) -> Scalar:
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        return text


def parse_pattern_expr(text: str, all_entities: bool = False) -> list[Pattern]:
    """Parse ``;``-separated patterns such as ``?o Scheme ?c | ?c.lang=de``.

    Each part is ``SUBJECT [KIND OBJECT]`` optionally followed by ``|`` and
    filters: ``?x:Object`` (domain) or ``?x.key=value`` (attribute; values
    read as bool/int when they look like one, quote them to force text).
    """
    patterns = []
    for part in text.split(";"):
        if not part.strip():
            continue
        head, _, tail = part.partition("|")
        try:
            terms = shlex.split(head)
            filters = shlex.split(tail, posix=False)
        except ValueError as exc:
            raise InvalidValue(f"cannot split pattern {part.strip()!r}: {exc}") from None
        if len(terms) not in (1, 3):
            raise InvalidValue(f"pattern {head.strip()!r} needs SUBJECT or SUBJECT KIND OBJECT")
        domains: dict[str, Domain] = {}
        attributes: dict[tuple[str, str], Scalar] = {}
        for item in filters:
            if not item.startswith("?"):
                raise InvalidValue(f"filter {item!r} must start with a variable")
            if "=" in item and "." in item.split("=", 1)[0]:
                lhs, raw = item.split("=", 1)
                var, key = lhs[1:].split(".", 1)
                if len(raw) >= 2 and raw[0] == raw[-1] == '"':
                    value: Scalar = raw[1:-1]
                else:
                    value = _literal(raw)
                attributes[(var, key)] = value
            elif ":" in item:
                var, domain = item[1:].split(":", 1)
                domains[var] = Domain.parse(domain)
            else:
                raise InvalidValue(f"cannot read filter {item!r}")
        kind = None
        obj = None
        if len(terms) == 3:
            if terms[1] not in ("*", "any"):
                kind = CorrelationKind.parse(terms[1])
            obj = parse_term(terms[2])
        patterns.append(Pattern(parse_term(terms[0]), kind, obj, domains, attributes, all_entities))
    if not patterns:
        raise InvalidValue("empty pattern expression")
    return patterns

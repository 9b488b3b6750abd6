"""Command-line interface: ``cdo <command> ...``.

A store directory is a snapshot directory plus ``keys.json`` (actor keys),
``cqs.json`` (registered competency questions) and an advisory lock file.
Every invocation loads and verifies the store, runs one command as
``--actor``, and writes the store back if the log grew.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import os
import shutil
import sys
import tempfile
from decimal import Decimal
from pathlib import Path
from typing import Optional

from . import __version__
from .access import OpClass, Permission, roles_document
from .canonical import attrs_to_json, parse_instant_loose
from .errors import CdoError, InvalidValue, StoreIOError, VerificationError
from .eventlog import Keyring, SystemClock
from .fixtures import build_apple_fixture, shipped_cqs
from .graphio import export_graph, import_graph
from .model import CorrelationKind, Domain, EntityId, Scalar
from .query import CQRegistry, dump_cq_file, load_cq_file, match_pattern, parse_pattern_expr, traverse
from .snapshot import MANIFEST_FILE, load_snapshot, save_snapshot
from .store import Store

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_VERIFY = 3

KEYS_FILE = "keys.json"
CQ_FILE = "cqs.json"
LOCK_FILE = ".lock"


# -- store directory handling ---------------------------------------------------

class StoreDir:
    """Exclusive, verified access to a store directory for one command."""

    def __init__(self, path: Path):
        self.path = path
        self._lock_fh = None
        self.store: Optional[Store] = None
        self._loaded_len = 0

    def __enter__(self) -> StoreDir:
        if not (self.path / MANIFEST_FILE).exists():
            raise StoreIOError(f"{self.path} is not a store (run 'cdo init {self.path}')")
        self._lock()
        keyring = read_keys(self.path)
        self.store = load_snapshot(self.path, keyring=keyring, clock=SystemClock())
        self._loaded_len = len(self.store.log)
        return self

    def __exit__(self, *exc_info) -> None:
        # denials are logged too, so persist whenever the log grew
        try:
            if self.store is not None and len(self.store.log) != self._loaded_len:
                persist(self.store, self.path)
        finally:
            self._unlock()

    def _lock(self) -> None:
        self._lock_fh = open(self.path / LOCK_FILE, "a+")
        try:
            fcntl.flock(self._lock_fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            self._lock_fh.close()
            self._lock_fh = None
            raise StoreIOError(f"{self.path} is locked by another cdo process") from None

    def _unlock(self) -> None:
        if self._lock_fh is not None:
            fcntl.flock(self._lock_fh, fcntl.LOCK_UN)
            self._lock_fh.close()
            self._lock_fh = None

    def cqs(self) -> CQRegistry:
        path = self.path / CQ_FILE
        return CQRegistry(load_cq_file(path.read_text(encoding="utf-8")) if path.exists() else [])

    def save_cqs(self, registry: CQRegistry) -> None:
        (self.path / CQ_FILE).write_text(dump_cq_file(registry), encoding="utf-8")


def read_keys(path: Path) -> Keyring:
    try:
        return Keyring.from_json(json.loads((path / KEYS_FILE).read_text(encoding="utf-8")))
    except FileNotFoundError:
        return Keyring()
    except (OSError, ValueError) as exc:
        raise StoreIOError(f"cannot read {path / KEYS_FILE}: {exc}") from exc


def write_keys(path: Path, keyring: Keyring) -> None:
    target = path / KEYS_FILE
    fd = os.open(target, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(keyring.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def persist(store: Store, path: Path) -> None:
    """Write the snapshot to a scratch directory, then move files into place."""
    write_keys(path, store.keyring)
    scratch = Path(tempfile.mkdtemp(prefix=".snapshot-", dir=path))
    try:
        save_snapshot(store, scratch)
        # manifest last, so a crash never pairs a new manifest with old files
        names = sorted(p.name for p in scratch.iterdir() if p.name != MANIFEST_FILE)
        for name in names + [MANIFEST_FILE]:
            os.replace(scratch / name, path / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _store_path(args: argparse.Namespace) -> Path:
    if not args.store:
        raise StoreIOError("no store given: pass --store DIR or set CDO_STORE")
    return Path(args.store)


# -- value parsing ------------------------------------------------------------------

_TYPED = {
    "str": str,
    "int": int,
    "decimal": Decimal,
    "bool": lambda text: {"true": True, "false": False}[text.lower()],
    "timestamp": parse_instant_loose,
}


def parse_attr(text: str) -> tuple[str, Scalar]:
    """``key=value`` (text) or ``key:type=value`` with type int/decimal/bool/timestamp/str."""
    lhs, sep, raw = text.partition("=")
    if not sep or not lhs:
        raise InvalidValue(f"expected key=value, got {text!r}")
    key, _, type_name = lhs.partition(":")
    convert = _TYPED.get(type_name or "str")
    if convert is None:
        raise InvalidValue(f"unknown attribute type {type_name!r}")
    try:
        return key, convert(raw)
    except (KeyError, ValueError, ArithmeticError) as exc:
        raise InvalidValue(f"cannot read {raw!r} as {type_name}: {exc}") from None


def parse_label(text: str) -> tuple[str, str]:
    tag, sep, value = text.partition("=")
    if not sep:
        raise InvalidValue(f"expected lang=text, got {text!r}")
    return tag, value


def _ids(text: str) -> list[EntityId]:
    return [EntityId.parse(part) for part in text.split(",") if part]


# -- output -------------------------------------------------------------------------

def emit(args: argparse.Namespace, doc: object, text: Optional[str] = None) -> None:
    if args.json or text is None:
        print(json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True))
    else:
        print(text)


# -- commands -------------------------------------------------------------------------

def cmd_init(args: argparse.Namespace) -> int:
    path = Path(args.dir)
    if (path / MANIFEST_FILE).exists():
        raise StoreIOError(f"{path} already holds a store")
    path.mkdir(parents=True, exist_ok=True)
    store = Store(clock=SystemClock(), keyring=Keyring())
    if args.fixture:
        store = build_apple_fixture()
    persist(store, path)
    if args.fixture:
        (path / CQ_FILE).write_text(dump_cq_file(shipped_cqs()), encoding="utf-8")
    emit(args, {"store": str(path), "events": len(store.log)}, f"initialized {path} ({len(store.log)} events)")
    return EXIT_OK


def cmd_add_entity(args: argparse.Namespace, sd: StoreDir) -> int:
    entity = sd.store.create_entity(
        args.actor,
        args.id,
        args.domain,
        dict(parse_label(t) for t in args.label),
        dict(parse_attr(t) for t in args.attr),
    )
    emit(args, {"id": entity.id.render(), "domain": entity.domain.value}, f"created {entity.id}")
    return EXIT_OK


def cmd_delete_entity(args: argparse.Namespace, sd: StoreDir) -> int:
    sd.store.delete_entity(args.actor, args.id)
    emit(args, {"deleted": args.id}, f"deleted {args.id}")
    return EXIT_OK


def cmd_show(args: argparse.Namespace, sd: StoreDir) -> int:
    state = sd.store.snapshot(args.actor).entity_state(EntityId.parse(args.id))
    if state is None:
        sd.store.get_entity(args.id)  # raises UnknownEntity when truly absent
        raise CdoError(f"{args.actor} may not read {args.id}")
    entity = state.entity
    doc = {
        "id": entity.id.render(),
        "domain": entity.domain.value,
        "labels": dict(entity.labels),
        "attributes": attrs_to_json(entity.attributes),
        "parents": [p.render() for p in state.parents],
        "anchor": state.anchor.render() if state.anchor else None,
        "digest": state.digest(),
    }
    emit(args, doc)
    return EXIT_OK


def cmd_link(args: argparse.Namespace, sd: StoreDir) -> int:
    corr = sd.store.link(args.actor, args.a, args.b, dict(parse_attr(t) for t in args.attr))
    doc = {"id": corr.id.render(), "kind": corr.kind.value, "a": corr.a.render(), "b": corr.b.render()}
    emit(args, doc, f"{corr.id}: {corr.a} {corr.kind.value} {corr.b}")
    return EXIT_OK


def cmd_map(args: argparse.Namespace, sd: StoreDir) -> int:
    m = sd.store.map_concept(args.actor, args.concept, args.object, args.vocab, args.kind)
    doc = {"id": m.id.render(), "concept": m.concept.render(), "object": m.object.render(),
           "kind": m.kind.value, "vocabulary": m.vocabulary}
    emit(args, doc, f"{m.id}: {m.concept} {m.kind.value} {m.object} [{m.vocabulary}]")
    return EXIT_OK


def cmd_hierarchy(args: argparse.Namespace, sd: StoreDir) -> int:
    store = sd.store
    if args.hier_cmd == "add":
        store.add_broader(args.actor, args.parent, args.child)
        emit(args, {"parent": args.parent, "child": args.child}, f"{args.parent} broader than {args.child}")
    elif args.hier_cmd == "anchor":
        store.set_anchor(args.actor, args.object, args.concept)
        emit(args, {"object": args.object, "concept": args.concept}, f"{args.object} anchored at {args.concept}")
    else:
        kind = store.classify_match(args.local, args.object)
        emit(args, {"local": args.local, "object": args.object, "kind": kind.value}, kind.value)
    return EXIT_OK


def cmd_translate(args: argparse.Namespace, sd: StoreDir) -> int:
    found = sorted(e.render() for e in sd.store.translate(args.term, args.vocab))
    emit(args, found, "\n".join(found) if found else "(no translation)")
    return EXIT_OK


def cmd_vocab(args: argparse.Namespace, sd: StoreDir) -> int:
    with open(args.file, encoding="utf-8") as fh:
        created = sd.store.import_vocabulary(args.actor, fh.read().split("\n"))
    emit(args, {"mappings": len(created)}, f"imported {len(created)} mappings")
    return EXIT_OK


def cmd_log(args: argparse.Namespace, sd: StoreDir) -> int:
    store = sd.store
    if args.log_cmd == "verify":
        report = store.verify()
        text = "valid" if report.valid else f"INVALID at seq {report.first_bad_seq}: {report.failure_kind.value}"
        emit(args, report.to_json(), text)
        return EXIT_OK if report.valid else EXIT_VERIFY
    if args.log_cmd == "replay":
        state = store.replay(args.upto)
        doc = {
            "upto": args.upto,
            "digest": state.digest(),
            "entities": len(state.entities),
            "correlations": len(state.correlations),
            "mappings": len(state.mappings),
            "matches_live": args.upto is None and state.digest() == store.state_digest(),
        }
        emit(args, doc, f"state digest {doc['digest']} ({doc['entities']} entities)")
        return EXIT_OK
    if args.log_cmd == "show":
        for record in store.log:
            if args.subject is None or record.subject == args.subject:
                print(record.to_line())
        return EXIT_OK
    before = store.entity_state(args.before) if args.before else None
    after = store.entity_state(args.after) if args.after else None
    stamp = parse_instant_loose(args.timestamp) if args.timestamp else None
    record = store.append_event(args.actor, args.action, args.subject, before, after, stamp)
    emit(args, record.to_json(), f"appended seq {record.seq} ({record.record_hash})")
    return EXIT_OK


def cmd_query(args: argparse.Namespace, sd: StoreDir) -> int:
    patterns = parse_pattern_expr(args.pattern, all_entities=args.all)
    result = match_pattern(sd.store.snapshot(args.actor), patterns)
    rows = result.to_json()
    text = "\n".join(" ".join(f"?{k}={v}" for k, v in sorted(row.items())) for row in rows)
    emit(args, rows, text or "(no solutions)")
    return EXIT_OK


def cmd_traverse(args: argparse.Namespace, sd: StoreDir) -> int:
    kinds = None if args.kinds in (None, "all") else [CorrelationKind.parse(k) for k in args.kinds.split(",") if k]
    sub = traverse(sd.store.snapshot(args.actor), EntityId.parse(args.start), kinds, args.depth)
    doc = sub.to_json()
    emit(args, doc, "\n".join(doc["entities"]))
    return EXIT_OK


def cmd_lineage(args: argparse.Namespace, sd: StoreDir) -> int:
    chain = sd.store.lineage(args.entity)
    lines = [f"{l.seq:>5}  {l.timestamp}  {l.actor:<12} {l.action}" for l in chain.links]
    lines.append("chain " + ("valid" if chain.verification.valid else "INVALID"))
    emit(args, chain.to_json(), "\n".join(lines))
    return EXIT_OK


def cmd_cq(args: argparse.Namespace, sd: StoreDir) -> int:
    registry = sd.cqs()
    if args.cq_cmd == "register":
        with open(args.file, encoding="utf-8") as fh:
            new = load_cq_file(fh.read())
        for cq in new:
            registry.register(cq)
        sd.save_cqs(registry)
        emit(args, {"registered": [cq.name for cq in new]}, f"registered {len(new)} competency question(s)")
        return EXIT_OK
    if args.cq_cmd == "list":
        emit(args, [cq.to_json() for cq in registry], "\n".join(f"{cq.name}: {cq.prose}" for cq in registry))
        return EXIT_OK
    report = registry.evaluate(sd.store.snapshot(args.actor))
    emit(args, report.to_json(), report.table())
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_consent(args: argparse.Namespace, sd: StoreDir) -> int:
    store = sd.store
    if args.consent_cmd == "grant":
        r = store.record_consent(args.actor, args.subject, args.purpose, _ids(args.scope), parse_instant_loose(args.at))
        emit(args, r.to_json(), f"granted {r.receipt_id}")
    elif args.consent_cmd == "revoke":
        r = store.revoke_consent(args.actor, args.receipt, parse_instant_loose(args.at))
        emit(args, r.to_json(), f"revoked {r.receipt_id}")
    elif args.consent_cmd == "check":
        d = store.check_usage_allowed(args.entity, args.purpose, parse_instant_loose(args.at))
        emit(args, {"allowed": d.allowed, "reason": d.reason}, f"{'allow' if d.allowed else 'deny'} ({d.reason})")
        return EXIT_OK
    else:
        report = store.audit_report(_ids(args.scope), args.purpose, parse_instant_loose(args.at))
        lines = [
            f"{e.entity}: {'allow' if e.consent.allowed else 'FLAG'} ({e.consent.reason}), "
            f"{e.lineage_length} event(s)"
            for e in report.entries
        ]
        lines.append("chain " + ("valid" if report.chain.valid else "INVALID"))
        lines.append("compliant" if report.compliant else "NOT compliant")
        emit(args, report.to_json(), "\n".join(lines))
    return EXIT_OK


def cmd_role(args: argparse.Namespace, sd: StoreDir) -> int:
    store = sd.store
    if args.role_cmd == "define":
        role = store.define_role(args.actor, args.name, [Permission.parse(g) for g in args.grant])
        emit(args, role.to_json(), f"defined role {role.name}")
    elif args.role_cmd == "assign":
        if args.actor_id not in {a.actor_id for a in store.actors()}:
            store.register_actor(args.actor, args.actor_id, [args.role])
        else:
            store.assign_role(args.actor, args.actor_id, args.role)
        emit(args, {"actor": args.actor_id, "role": args.role}, f"{args.actor_id} has role {args.role}")
    elif args.role_cmd == "check":
        d = store.check(args.actor_id, OpClass.parse(args.op), Domain.parse(args.domain))
        emit(args, {"allowed": d.allowed, "reason": d.reason}, f"{'allow' if d.allowed else 'deny'} ({d.reason})")
    elif args.role_cmd == "apply":
        with open(args.file, encoding="utf-8") as fh:
            changes = store.apply_roles_document(args.actor, json.load(fh))
        emit(args, {"changes": changes}, f"{changes} change(s)")
    else:
        emit(args, roles_document(store.roles(), store.actors()))
    return EXIT_OK


def cmd_export(args: argparse.Namespace, sd: StoreDir) -> int:
    text = export_graph(sd.store.state_copy())
    if args.file and args.file != "-":
        Path(args.file).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_import(args: argparse.Namespace, sd: StoreDir) -> int:
    text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text(encoding="utf-8")
    delta = import_graph(sd.store, text, args.actor)
    emit(args, delta.to_json(), ", ".join(f"{k}={v}" for k, v in delta.to_json().items()))
    return EXIT_OK


def cmd_snapshot(args: argparse.Namespace) -> int:
    path = _store_path(args)
    target = Path(args.dir)
    if args.snap_cmd == "save":
        with StoreDir(path) as sd:
            manifest = save_snapshot(sd.store, target)
            write_keys(target, sd.store.keyring)
        emit(args, manifest, f"saved {manifest['counts']['events']} events to {target}")
        return EXIT_OK
    keyring = read_keys(Path(args.keys) if args.keys else target)
    store = load_snapshot(target, keyring=keyring, clock=SystemClock())
    path.mkdir(parents=True, exist_ok=True)
    sd = StoreDir(path)
    sd._lock()
    try:
        persist(store, path)
    finally:
        sd._unlock()
    emit(args, {"events": len(store.log), "digest": store.state_digest()}, f"loaded {len(store.log)} events into {path}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdo", description="Quadrimodal knowledge store.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--actor", default=os.environ.get("CDO_ACTOR", "system"), help="acting identity (default: $CDO_ACTOR or system)")
    parser.add_argument("--store", default=os.environ.get("CDO_STORE"), help="store directory (default: $CDO_STORE)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create a store directory")
    p.add_argument("dir")
    p.add_argument("--fixture", action="store_true", help="seed with the apple fixture and its CQs")
    p.set_defaults(func=cmd_init, needs_store=False)

    p = sub.add_parser("add-entity", help="create an entity")
    p.add_argument("--id", required=True)
    p.add_argument("--domain", required=True, type=str.capitalize, choices=[d.value for d in Domain])
    p.add_argument("--label", action="append", default=[], metavar="LANG=TEXT")
    p.add_argument("--attr", action="append", default=[], metavar="KEY[:TYPE]=VALUE")
    p.set_defaults(func=cmd_add_entity)

    p = sub.add_parser("delete-entity", help="delete an unreferenced entity")
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_delete_entity)

    p = sub.add_parser("show", help="show an entity and its digest")
    p.add_argument("--id", required=True)
    p.set_defaults(func=cmd_show)

    p = sub.add_parser("link", help="correlate two entities of different domains")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--attr", action="append", default=[], metavar="KEY[:TYPE]=VALUE")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("map", help="map a concept to a pivot object")
    p.add_argument("--concept", required=True)
    p.add_argument("--object", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--kind", choices=["equivalent", "broader", "narrower", "partial"])
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("hierarchy", help="broader-than hierarchy")
    hs = p.add_subparsers(dest="hier_cmd", required=True)
    q = hs.add_parser("add")
    q.add_argument("--parent", required=True)
    q.add_argument("--child", required=True)
    q = hs.add_parser("anchor")
    q.add_argument("--object", required=True)
    q.add_argument("--concept", required=True)
    q = hs.add_parser("classify")
    q.add_argument("--local", required=True)
    q.add_argument("--object", required=True)
    p.set_defaults(func=cmd_hierarchy)

    p = sub.add_parser("translate", help="translate a term through Equivalent mappings")
    p.add_argument("--term", required=True)
    p.add_argument("--vocab", required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("vocab", help="vocabulary files")
    vs = p.add_subparsers(dest="vocab_cmd", required=True)
    q = vs.add_parser("import")
    q.add_argument("file")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("log", help="event log")
    ls = p.add_subparsers(dest="log_cmd", required=True)
    ls.add_parser("verify")
    q = ls.add_parser("replay")
    q.add_argument("--upto", type=int)
    q = ls.add_parser("show")
    q.add_argument("--subject")
    q = ls.add_parser("append", help="notarize a domain event")
    q.add_argument("--action", required=True)
    q.add_argument("--subject", required=True)
    q.add_argument("--before", help="entity whose current snapshot is the previous state")
    q.add_argument("--after", help="entity whose current snapshot is the final state")
    q.add_argument("--timestamp")
    p.set_defaults(func=cmd_log)

    p = sub.add_parser("query", help="pattern query, e.g. '?o Scheme ?c | ?c.lang=de'")
    p.add_argument("--pattern", required=True)
    p.add_argument("--all", action="store_true", help="allow unconstrained scans")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("traverse", help="breadth-first subgraph")
    p.add_argument("--start", required=True)
    p.add_argument("--kinds", help="comma-separated correlation kinds (default: all)")
    p.add_argument("--depth", type=int, default=1)
    p.set_defaults(func=cmd_traverse)

    p = sub.add_parser("lineage", help="provenance chain of an entity")
    p.add_argument("--entity", required=True)
    p.set_defaults(func=cmd_lineage)

    p = sub.add_parser("cq", help="competency questions")
    cs = p.add_subparsers(dest="cq_cmd", required=True)
    q = cs.add_parser("register")
    q.add_argument("file")
    cs.add_parser("run")
    cs.add_parser("list")
    p.set_defaults(func=cmd_cq)

    p = sub.add_parser("consent", help="consent receipts")
    ks = p.add_subparsers(dest="consent_cmd", required=True)
    q = ks.add_parser("grant")
    q.add_argument("--subject", required=True)
    q.add_argument("--purpose", required=True)
    q.add_argument("--scope", required=True, help="comma-separated entity ids")
    q.add_argument("--at", required=True)
    q = ks.add_parser("revoke")
    q.add_argument("--receipt", required=True)
    q.add_argument("--at", required=True)
    q = ks.add_parser("check")
    q.add_argument("--entity", required=True)
    q.add_argument("--purpose", required=True)
    q.add_argument("--at", required=True)
    q = ks.add_parser("audit")
    q.add_argument("--scope", required=True)
    q.add_argument("--purpose", required=True)
    q.add_argument("--at", required=True)
    p.set_defaults(func=cmd_consent)

    p = sub.add_parser("role", help="roles and actors")
    rs = p.add_subparsers(dest="role_cmd", required=True)
    q = rs.add_parser("define")
    q.add_argument("--name", required=True)
    q.add_argument("--grant", action="append", default=[], metavar="DOMAIN:OP")
    q = rs.add_parser("assign")
    q.add_argument("--actor-id", required=True)
    q.add_argument("--role", required=True)
    q = rs.add_parser("check")
    q.add_argument("--actor-id", required=True)
    q.add_argument("--op", required=True, choices=[o.value for o in OpClass])
    q.add_argument("--domain", required=True)
    q = rs.add_parser("apply")
    q.add_argument("file")
    rs.add_parser("list")
    p.set_defaults(func=cmd_role)

    p = sub.add_parser("export", help="write the graph as sorted triples")
    p.add_argument("file", nargs="?", default="-")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("import", help="merge a triples document")
    p.add_argument("file")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("snapshot", help="save or load a snapshot directory")
    ss = p.add_subparsers(dest="snap_cmd", required=True)
    q = ss.add_parser("save")
    q.add_argument("dir")
    q = ss.add_parser("load")
    q.add_argument("dir")
    q.add_argument("--keys", help="directory holding keys.json (default: the snapshot)")
    p.set_defaults(func=cmd_snapshot, needs_store=False)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "needs_store", True):
            with StoreDir(_store_path(args)) as sd:
                return args.func(args, sd)
        return args.func(args)
    except VerificationError as exc:
        print(f"cdo: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except CdoError as exc:
        print(f"cdo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"cdo: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

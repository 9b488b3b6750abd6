"""Snapshot directories: full state plus the event log, with a manifest.

Layout::

    entities.jsonl  correlations.jsonl  mappings.jsonl  hierarchy.jsonl
    consents.jsonl  roles.json  events.log  manifest.json

The manifest's ``root_digest`` is the ``record_hash`` of the last log
record (all zeros for an empty log).  Loading verifies the chain, replays
it, and checks that the replayed state matches the files.
"""

from __future__ import annotations

import json
import os
from collections.abc import Iterable
from pathlib import Path

from .access import parse_roles_document, roles_document
from .canonical import ZERO_DIGEST
from .consent import ConsentReceipt
from .errors import CdoError, CorruptSnapshot, StoreIOError
from .eventlog import DEFAULT_SIGNER, Clock, EventLog, Keyring, Signer, read_log, verify_chain, write_log
from .model import EntityId
from .state import (
    State,
    correlation_from_payload,
    correlation_payload,
    entity_from_payload,
    entity_payload,
    mapping_from_payload,
    mapping_payload,
    replay,
)
from .store import Store

FORMAT_VERSION = 1
JSONL_FILES = ("entities", "correlations", "mappings", "hierarchy", "consents")
LOG_FILE = "events.log"
ROLES_FILE = "roles.json"
MANIFEST_FILE = "manifest.json"


def _by_render(ids: Iterable[EntityId]) -> list[EntityId]:
    return sorted(ids, key=EntityId.render)


def _dumps(doc: object) -> str:
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def state_documents(state: State) -> dict[str, list[dict]]:
    """The JSON Lines content of each instance file, in canonical order."""
    hierarchy = [{"type": "broader", "parent": p.render(), "child": c.render()} for p, c in state.hierarchy.edges()]
    hierarchy += [
        {"type": "anchor", "object": o.render(), "concept": state.anchors[o].render()}
        for o in _by_render(state.anchors)
    ]
    return {
        "entities": [entity_payload(state.entities[k]) for k in _by_render(state.entities)],
        "correlations": [correlation_payload(state.correlations[k]) for k in _by_render(state.correlations)],
        "mappings": [mapping_payload(state.mappings[k]) for k in _by_render(state.mappings)],
        "hierarchy": hierarchy,
        "consents": [state.consents[k].to_json() for k in _by_render(state.consents)],
    }


def save_snapshot(store: Store, path: str | os.PathLike) -> dict[str, object]:
    """Write ``store`` to the directory ``path``; returns the manifest."""
    view = store.snapshot()
    state, records = view.state, view.records
    docs = state_documents(state)
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        for name in JSONL_FILES:
            with open(root / f"{name}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
                fh.writelines(_dumps(doc) + "\n" for doc in docs[name])
        roles = roles_document(state.roles.values(), state.actors.values())
        (root / ROLES_FILE).write_text(json.dumps(roles, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_log(root / LOG_FILE, records)
        manifest = {
            "format_version": FORMAT_VERSION,
            "counts": {**{name: len(docs[name]) for name in JSONL_FILES}, "events": len(records)},
            "root_digest": records[-1].record_hash if records else ZERO_DIGEST,
        }
        (root / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise StoreIOError(f"cannot write snapshot to {root}: {exc}") from exc
    return manifest


def _read_lines(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line for line in fh.read().split("\n") if line.strip()]


def state_from_documents(docs: dict[str, list[dict]], roles_doc: dict) -> State:
    state = State()
    for doc in docs["entities"]:
        entity = entity_from_payload(doc)
        state.entities[entity.id] = entity
    for doc in docs["correlations"]:
        corr = correlation_from_payload(doc)
        state.correlations[corr.id] = corr
    for doc in docs["mappings"]:
        m = mapping_from_payload(doc)
        state.mappings[m.id] = m
    for doc in docs["hierarchy"]:
        if doc.get("type") == "broader":
            state.hierarchy.add(EntityId.parse(doc["parent"]), EntityId.parse(doc["child"]))
        elif doc.get("type") == "anchor":
            state.anchors[EntityId.parse(doc["object"])] = EntityId.parse(doc["concept"])
        else:
            raise ValueError(f"unknown hierarchy line type {doc.get('type')!r}")
    for doc in docs["consents"]:
        receipt = ConsentReceipt.from_json(doc)
        state.consents[receipt.receipt_id] = receipt
    roles, actors = parse_roles_document(roles_doc)
    state.roles = {r.name: r for r in roles}
    state.actors = {a.actor_id: a for a in actors}
    return state


def load_snapshot(
    path: str | os.PathLike,
    *,
    keyring: Keyring,
    clock: Clock,
    signer: Signer = DEFAULT_SIGNER,
) -> Store:
    """Read and fully verify a snapshot directory.

    Raises CorruptSnapshot when the manifest disagrees with the files, the
    chain fails verification, or replay does not reproduce the files.
    """
    root = Path(path)
    try:
        manifest = json.loads((root / MANIFEST_FILE).read_text(encoding="utf-8"))
        lines = {name: _read_lines(root / f"{name}.jsonl") for name in JSONL_FILES}
        roles_doc = json.loads((root / ROLES_FILE).read_text(encoding="utf-8"))
        log_lines = _read_lines(root / LOG_FILE)
    except FileNotFoundError as exc:
        raise CorruptSnapshot(f"snapshot file missing: {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"unreadable snapshot JSON: {exc}") from exc
    except OSError as exc:
        raise StoreIOError(f"cannot read snapshot {root}: {exc}") from exc

    if not isinstance(manifest, dict) or manifest.get("format_version") != FORMAT_VERSION:
        raise CorruptSnapshot("unsupported or missing manifest format_version")
    counts = manifest.get("counts") or {}
    actual = {**{name: len(lines[name]) for name in JSONL_FILES}, "events": len(log_lines)}
    for name, count in actual.items():
        if counts.get(name) != count:
            raise CorruptSnapshot(f"manifest counts {counts.get(name)} {name} but found {count}")

    try:
        records = read_log(root / LOG_FILE)
    except CdoError as exc:
        raise CorruptSnapshot(f"{LOG_FILE}: {exc}") from exc
    root_digest = records[-1].record_hash if records else ZERO_DIGEST
    if manifest.get("root_digest") != root_digest:
        raise CorruptSnapshot("manifest root digest does not match the log tail")
    report = verify_chain(records, keyring, signer)
    if not report.valid:
        raise CorruptSnapshot(
            f"event log fails verification at seq {report.first_bad_seq}: {report.failure_kind.value}"
        )
    try:
        docs = {name: [json.loads(line) for line in lines[name]] for name in JSONL_FILES}
        from_files = state_from_documents(docs, roles_doc)
        replayed = replay(records, keyring, signer=signer)
    except (CdoError, KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"snapshot content is invalid: {exc}") from exc
    if from_files.digest() != replayed.digest():
        raise CorruptSnapshot("replayed log does not reproduce the snapshot files")
    return Store(clock=clock, keyring=keyring, signer=signer, state=replayed, log=EventLog(records))

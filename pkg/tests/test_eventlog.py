from __future__ import annotations

import hashlib
import hmac
from dataclasses import replace
from datetime import timedelta

import pytest
from hypothesis import given, settings, strategies as st

from cdo_store.canonical import ZERO_DIGEST
from cdo_store.errors import ClockRegression, ParseError, UnknownActor
from cdo_store.eventlog import (
    EventLog,
    FailureKind,
    Keyring,
    read_log,
    record_from_line,
    verify_chain,
    verify_lines,
    write_log,
)

from helpers import T0, ref_record, ref_sha256


def build_log(n: int, keyring: Keyring, actors=("alice", "bob")) -> EventLog:
    log = EventLog()
    for i in range(n):
        actor = actors[i % len(actors)]
        log.append(
            actor=actor,
            action="ex:touch",
            subject=f"ex:s{i % 3}",
            previous_state=ZERO_DIGEST,
            final_state=ref_sha256(str(i).encode()),
            timestamp=T0 + timedelta(seconds=i),
            payload={"i": i, "tags": ["a", "b"]},
            key=keyring.get(actor),
        )
    return log


@pytest.fixture
def keyring():
    ring = Keyring()
    ring.add("alice")
    ring.add("bob")
    return ring


def test_record_hash_and_tag_follow_the_documented_layout(keyring):
    log = build_log(3, keyring)
    prev = ZERO_DIGEST
    for r in log:
        body = ref_record(
            "event", r.seq, r.event_entity, r.actor, r.action, r.subject,
            r.previous_state, r.final_state, r.timestamp, dict(r.payload), r.prev_hash,
        )
        assert r.prev_hash == prev
        assert r.record_hash == ref_sha256(body)
        expected = hmac.new(keyring.get(r.actor), bytes.fromhex(r.record_hash), hashlib.sha256)
        assert r.auth_tag == expected.hexdigest()
        assert r.event_entity == f"evt:{r.seq}"
        prev = r.record_hash


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.data())
def test_any_single_field_change_is_detected(n, data):
    ring = Keyring({"alice": b"k" * 32, "bob": b"j" * 32})
    records = list(build_log(n, ring))
    assert verify_chain(records, ring).valid
    index = data.draw(st.integers(0, n - 1))
    name = data.draw(st.sampled_from(["actor", "action", "subject", "previous_state", "final_state", "timestamp", "payload", "prev_hash", "record_hash", "auth_tag"]))
    value = getattr(records[index], name)
    if name == "payload":
        changed = {**value, "i": value["i"] + 1}
    elif name == "actor":
        changed = "bob" if value == "alice" else "alice"
    elif name == "timestamp":
        changed = value[:-2] + ("1Z" if value[-2] != "1" else "2Z")
    else:
        changed = value[:-1] + ("0" if value[-1] != "0" else "1")
    records[index] = replace(records[index], **{name: changed})
    report = verify_chain(records, ring)
    assert not report.valid
    assert report.first_bad_seq == index


def test_failure_kinds(keyring):
    records = list(build_log(4, keyring))
    swapped = records[:1] + records[2:]
    assert verify_chain(swapped, keyring).failure_kind is FailureKind.SEQ_GAP

    relinked = records[:2] + [replace(records[2], prev_hash=ZERO_DIGEST)] + records[3:]
    assert verify_chain(relinked, keyring).failure_kind is FailureKind.CHAIN_BREAK

    edited = records[:2] + [replace(records[2], action="ex:other")] + records[3:]
    assert verify_chain(edited, keyring).failure_kind is FailureKind.HASH_MISMATCH

    wrong_keys = Keyring({"alice": keyring.get("alice"), "bob": b"x" * 32})
    report = verify_chain(records, wrong_keys)
    assert (report.first_bad_seq, report.failure_kind) == (1, FailureKind.AUTH_FAILURE)

    missing = Keyring({"alice": keyring.get("alice")})
    assert verify_chain(records, missing).failure_kind is FailureKind.AUTH_FAILURE


def test_uppercase_tag_is_not_accepted(keyring):
    records = list(build_log(2, keyring))
    records[1] = replace(records[1], auth_tag=records[1].auth_tag.upper())
    assert verify_chain(records, keyring).failure_kind is FailureKind.AUTH_FAILURE


def test_clock_regression_is_refused(keyring):
    log = build_log(2, keyring)
    with pytest.raises(ClockRegression):
        log.append(
            actor="alice", action="ex:a", subject="ex:s", previous_state=ZERO_DIGEST,
            final_state=ZERO_DIGEST, timestamp=T0, payload={}, key=keyring.get("alice"),
        )
    assert len(log) == 2


def test_equal_timestamps_are_allowed(keyring):
    log = EventLog()
    for _ in range(2):
        log.append(
            actor="alice", action="ex:a", subject="ex:s", previous_state=ZERO_DIGEST,
            final_state=ZERO_DIGEST, timestamp=T0, payload={}, key=keyring.get("alice"),
        )
    assert verify_chain(log.records, keyring).valid


def test_log_file_round_trip(tmp_path, keyring):
    log = build_log(5, keyring)
    path = tmp_path / "events.log"
    write_log(path, log)
    assert read_log(path) == list(log)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert verify_lines(lines, keyring).valid
    lines[3] = lines[3][:-2]
    report = verify_lines(lines, keyring)
    assert (report.first_bad_seq, report.failure_kind) == (3, FailureKind.HASH_MISMATCH)


@pytest.mark.parametrize(
    "line",
    ["{}", "[1]", "not json", '{"seq": "0"}'],
)
def test_malformed_lines(line):
    with pytest.raises(ParseError):
        record_from_line(line)


def test_keyring(keyring):
    assert "alice" in keyring
    with pytest.raises(UnknownActor):
        keyring.get("carol")
    back = Keyring.from_json(keyring.to_json())
    assert back.get("bob") == keyring.get("bob")
    copy = keyring.copy()
    copy.add("carol")
    assert "carol" not in keyring

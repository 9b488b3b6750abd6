from __future__ import annotations

import json
import subprocess
import sys

import pytest

from cdo_store.cli import main


@pytest.fixture
def store_dir(tmp_path, monkeypatch):
    path = tmp_path / "store"
    assert main(["init", str(path), "--fixture"]) == 0
    monkeypatch.setenv("CDO_STORE", str(path))
    monkeypatch.delenv("CDO_ACTOR", raising=False)
    return path


def run(capsys, *argv):
    capsys.readouterr()
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, "--json", *argv)
    assert code == 0, err
    return json.loads(out)


def test_translate_and_traverse(store_dir, capsys):
    assert run_json(capsys, "translate", "--term", ":pomme", "--vocab", "de") == [":apfel"]
    code, out, _ = run(capsys, "translate", "--term", ":pomme", "--vocab", "de")
    assert code == 0 and ":apfel" in out
    sub = run_json(capsys, "traverse", "--start", ":apple", "--kinds", "Scheme", "--depth", "1")
    assert sub["entities"] == [":apfel", ":apple", ":pomme"]


def test_query_and_cqs(store_dir, capsys):
    rows = run_json(capsys, "query", "--pattern", "?o Scheme ?c | ?c.lang=de")
    assert rows == [{"c": ":apfel", "o": ":apple"}]
    code, out, _ = run(capsys, "cq", "run")
    assert code == 0 and "13/13 passed" in out
    code, _, _ = run(capsys, "query", "--pattern", "?x * ?y")
    assert code == 1


def test_writes_persist_and_verify(store_dir, capsys):
    code, _, err = run(capsys, "add-entity", "--id", "ex:pear", "--domain", "object", "--label", "en=pear", "--attr", "n:int=3")
    assert code == 0, err
    shown = run_json(capsys, "show", "--id", "ex:pear")
    assert json.dumps(shown).count("pear") >= 2
    assert run(capsys, "log", "verify")[0] == 0
    assert run(capsys, "link", "--a", "ex:pear", "--b", ":fruit")[0] == 0
    assert run(capsys, "add-entity", "--id", "ex:pear", "--domain", "Object")[0] == 1


def test_denial_exits_1_and_is_logged(store_dir, capsys):
    before = len((store_dir / "events.log").read_text().splitlines())
    code, _, err = run(capsys, "--actor", "alice", "add-entity", "--id", "ex:x", "--domain", "Object")
    assert code == 1 and "Unauthorized" in err
    lines = (store_dir / "events.log").read_text().splitlines()
    assert len(lines) == before + 1
    assert json.loads(lines[-1])["action"] == "cdo:deny"
    assert run(capsys, "log", "verify")[0] == 0


def test_usage_errors_exit_2(store_dir, capsys):
    with pytest.raises(SystemExit) as info:
        main(["add-entity", "--id", "ex:x"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_tampered_log_exits_3(store_dir, capsys):
    path = store_dir / "events.log"
    lines = path.read_text().splitlines()
    doc = json.loads(lines[5])
    doc["actor"] = "alice"
    lines[5] = json.dumps(doc)
    path.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "log", "verify")
    assert code == 3 and "verification failed" in err


def test_consent_and_lineage(store_dir, capsys):
    ok = run_json(capsys, "consent", "check", "--entity", ":apple", "--purpose", "research", "--at", "2024-06-01T00:00:00Z")
    assert ok["allowed"] is True
    assert run(capsys, "consent", "revoke", "--receipt", "rcpt:26", "--at", "2024-03-01T00:00:00Z")[0] == 0
    audit = run_json(capsys, "consent", "audit", "--scope", ":apple", "--purpose", "research", "--at", "2024-06-01T00:00:00Z")
    assert audit["compliant"] is False
    chain = run_json(capsys, "lineage", "--entity", ":fuji_apple")
    assert chain["verification"]["valid"] is True
    assert [link["action"] for link in chain["links"]][-1] == ":generalize"


def test_hierarchy_roles_and_export(store_dir, tmp_path, capsys):
    code, out, _ = run(capsys, "hierarchy", "classify", "--local", ":fruit", "--object", ":apple")
    assert code == 0 and "broader" in out
    assert run(capsys, "role", "define", "--name", "reader", "--grant", "Object:read")[0] == 0
    assert run(capsys, "role", "assign", "--actor-id", "alice", "--role", "reader")[0] == 0
    decision = run_json(capsys, "role", "check", "--actor-id", "alice", "--op", "read", "--domain", "Object")
    assert decision["allowed"] is True
    out_file = tmp_path / "graph.nt"
    assert run(capsys, "export", str(out_file))[0] == 0
    fresh = tmp_path / "fresh"
    assert main(["init", str(fresh)]) == 0
    assert run(capsys, "--store", str(fresh), "import", str(out_file))[0] == 0
    code, out, _ = run(capsys, "--store", str(fresh), "export")
    assert out == out_file.read_text()


def test_snapshot_save_and_load(store_dir, tmp_path, capsys):
    target = tmp_path / "snap"
    assert run(capsys, "snapshot", "save", str(target))[0] == 0
    assert run(capsys, "snapshot", "load", str(target), "--keys", str(store_dir))[0] == 0


def test_module_entry_point(store_dir):
    result = subprocess.run(
        [sys.executable, "-m", "cdo_store", "--store", str(store_dir), "log", "verify"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr

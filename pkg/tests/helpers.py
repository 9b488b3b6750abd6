"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import hashlib
import random
from datetime import datetime, timedelta, timezone
from decimal import Decimal

from cdo_store import Domain, EntityId, Keyring, Permission, OpClass, StepClock, Store
from cdo_store.errors import CdoError

T0 = datetime(2024, 3, 1, tzinfo=timezone.utc)


def new_store(start: datetime = T0, keyring: Keyring | None = None) -> Store:
    return Store(clock=StepClock(start, timedelta(milliseconds=1)), keyring=keyring or Keyring())


# -- independent canonical encoding -------------------------------------------
# A second, deliberately naive implementation of the documented token layout
# used to check engine digests without calling the engine's encoder.

def ref_token(value) -> bytes:
    if value is None:
        return b"n"
    if value is True:
        return b"b1"
    if value is False:
        return b"b0"
    if isinstance(value, int):
        return b"i" + str(value).encode()
    if isinstance(value, Decimal):
        return b"d" + str(value).encode()
    if isinstance(value, str):
        return b"s" + value.encode("utf-8")
    if isinstance(value, datetime):
        return b"t" + value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ").encode()
    if isinstance(value, dict):
        keys = sorted(value, key=lambda k: k.encode("utf-8"))
        parts = [b"m" + str(len(keys)).encode()]
        for k in keys:
            parts += [b"s" + k.encode("utf-8"), ref_token(value[k])]
        return b"\x1f".join(parts)
    if isinstance(value, (list, tuple)):
        return b"\x1f".join([b"l" + str(len(value)).encode()] + [ref_token(v) for v in value])
    if isinstance(value, EntityId):
        return b"s" + value.render().encode("utf-8")
    raise TypeError(type(value))


def ref_record(*fields) -> bytes:
    return b"\x1f".join(ref_token(f) for f in fields) + b"\x1e"


def ref_sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def ref_entity_state_digest(entity, parents=(), anchor=None) -> str:
    """Digest of an entity snapshot: entity record followed by its position record."""
    body = ref_record(
        "entity", entity.id, entity.domain.value, dict(entity.labels), dict(entity.attributes)
    ) + ref_record("position", sorted(p.render() for p in parents), anchor)
    return ref_sha256(body)


# -- random stores --------------------------------------------------------------

def random_store(rng: random.Random, n_entities: int, n_correlations: int, *, extras: bool = True) -> Store:
    """A store populated through the public API by the system actor."""
    store = new_store()
    ids_by_domain: dict[Domain, list[EntityId]] = {d: [] for d in Domain}
    for i in range(n_entities):
        domain = rng.choice(list(Domain))
        eid = EntityId(rng.choice(["", "ex", "org.a"]), f"e{i}")
        attrs = {}
        if rng.random() < 0.5:
            attrs["n"] = rng.randint(-5, 5)
        if rng.random() < 0.2:
            attrs["lang"] = rng.choice(["en", "fr", "de"])
        if rng.random() < 0.1:
            attrs["w"] = Decimal(rng.randint(0, 999)) / 100
        if rng.random() < 0.1:
            attrs["ok"] = rng.random() < 0.5
        if rng.random() < 0.05:
            attrs["at"] = T0 + timedelta(seconds=rng.randint(0, 10**6))
        labels = {"en": f"label {i}"} if rng.random() < 0.5 else {}
        store.create_entity("system", eid, domain, labels, attrs)
        ids_by_domain[domain].append(eid)
    domains = [d for d in Domain if ids_by_domain[d]]
    if len(domains) >= 2:
        for _ in range(n_correlations):
            d1, d2 = rng.sample(domains, 2)
            a, b = rng.choice(ids_by_domain[d1]), rng.choice(ids_by_domain[d2])
            attrs = {"w": rng.randint(0, 3)} if rng.random() < 0.2 else {}
            store.link("system", a, b, attrs)
    if extras:
        concepts = ids_by_domain[Domain.CONCEPT]
        objects = ids_by_domain[Domain.OBJECT]
        for _ in range(min(len(concepts), 20)):
            p, c = rng.sample(concepts, 2) if len(concepts) >= 2 else (None, None)
            if p is None:
                break
            try:
                store.add_broader("system", p, c)
            except CdoError:
                pass
        for obj in objects[:5]:
            if concepts:
                try:
                    store.set_anchor("system", obj, rng.choice(concepts))
                except CdoError:
                    pass
        for _ in range(min(len(concepts), 10)):
            if concepts and objects:
                try:
                    store.map_concept(
                        "system", rng.choice(concepts), rng.choice(objects), rng.choice(["en", "fr", "de"])
                    )
                except CdoError:
                    pass
    return store


ALL_PERMISSIONS = [Permission(d, op) for d in Domain for op in (OpClass.READ, OpClass.WRITE)] + [
    Permission(Domain.EVENT, OpClass.APPEND)
]

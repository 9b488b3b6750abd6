from __future__ import annotations

from datetime import datetime, timedelta, timezone
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from cdo_store.canonical import (
    digest,
    encode_record,
    encode_token,
    format_instant,
    is_digest,
    parse_instant,
    parse_instant_loose,
    scalar_from_json,
    scalar_to_json,
)
from cdo_store.errors import InvalidValue
from cdo_store.model import EntityId

from helpers import ref_record, ref_sha256, ref_token

safe_text = st.text(st.characters(blacklist_characters="\x1e\x1f", blacklist_categories=("Cs",)))
instants = st.datetimes(
    min_value=datetime(1970, 1, 1), max_value=datetime(2200, 1, 1), timezones=st.just(timezone.utc)
)
scalars = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(),
    st.decimals(allow_nan=False, allow_infinity=False),
    safe_text,
    instants,
)
values = st.recursive(
    scalars,
    lambda inner: st.one_of(
        st.lists(inner, max_size=4), st.dictionaries(safe_text, inner, max_size=4)
    ),
    max_leaves=12,
)


@given(values)
def test_token_matches_reference_encoder(value):
    assert encode_token(value) == ref_token(value)


def structure(value):
    """Type-tagged structural key: equal keys must mean equal encodings and back."""
    if isinstance(value, dict):
        return ("map", tuple(sorted((k, structure(v)) for k, v in value.items())))
    if isinstance(value, list):
        return ("list", tuple(structure(v) for v in value))
    return (type(value).__name__, str(value))


@given(values, values)
def test_encoding_is_injective(x, y):
    assert (encode_record(x) == encode_record(y)) == (structure(x) == structure(y))


@given(st.lists(values, max_size=5))
def test_record_digest_matches_reference(fields):
    assert digest(encode_record(*fields)) == ref_sha256(ref_record(*fields))


def test_known_token_layout():
    when = datetime(2024, 1, 2, 3, 4, 5, 6, tzinfo=timezone.utc)
    assert encode_record(None, True, -7, Decimal("1.50"), "é", when) == (
        b"n\x1fb1\x1fi-7\x1fd1.50\x1fs\xc3\xa9\x1ft2024-01-02T03:04:05.000006Z\x1e"
    )
    assert encode_token({"b": 1, "a": [2]}) == b"m2\x1fsa\x1fl1\x1fi2\x1fsb\x1fi1"
    assert encode_token(EntityId("ex", "x")) == b"sex:x"


def test_bool_and_int_differ():
    assert encode_token(True) != encode_token(1)
    assert encode_token(False) != encode_token(0)


@pytest.mark.parametrize("bad", ["a\x1fb", "a\x1eb", {"k\x1f": 1}, Decimal("NaN"), 1.5, object()])
def test_unencodable_values_are_rejected(bad):
    with pytest.raises(InvalidValue):
        encode_token(bad)


def test_naive_instants_are_rejected():
    with pytest.raises(InvalidValue):
        encode_token(datetime(2024, 1, 1))


@given(instants)
def test_instant_round_trip(value):
    assert parse_instant(format_instant(value)) == value


def test_instants_normalize_to_utc():
    plus_two = timezone(timedelta(hours=2))
    local = datetime(2024, 1, 1, 12, tzinfo=plus_two)
    assert format_instant(local) == "2024-01-01T10:00:00.000000Z"
    assert parse_instant_loose("2024-01-01T12:00:00+02:00") == local
    assert parse_instant_loose("2024-01-01T10:00:00Z") == local
    with pytest.raises(InvalidValue):
        parse_instant_loose("2024-01-01T10:00:00")
    with pytest.raises(InvalidValue):
        parse_instant("2024-01-01T10:00:00Z")


@given(st.one_of(st.booleans(), st.integers(), safe_text, st.decimals(allow_nan=False, allow_infinity=False), instants))
def test_scalar_json_round_trip(value):
    back = scalar_from_json(scalar_to_json(value))
    assert type(back) is type(value)
    assert encode_token(back) == encode_token(value)


def test_is_digest():
    assert is_digest("0" * 64)
    assert is_digest(ref_sha256(b""))
    assert not is_digest("A" * 64)
    assert not is_digest("0" * 63)
    assert not is_digest(None)

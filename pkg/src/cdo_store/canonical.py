"""Canonical byte layout, digests, and instant formatting.

Every hashed structure is a *record*: a fixed sequence of fields, each
encoded as a tagged token, tokens joined by the unit separator ``0x1F``
and the record terminated by ``0x1E``.

Token encoding (the tag is a single ASCII letter)::

    None        n
    bool        b1 | b0
    int         i<decimal ASCII>
    Decimal     d<str(Decimal)>
    str         s<UTF-8 bytes>
    instant     t<RFC 3339, microseconds, "Z">
    mapping     m<count> then, per key in byte order, US <key> US <value>
    sequence    l<count> then, per item, US <item>

Strings may not contain ``0x1E`` or ``0x1F``; with that restriction the
encoding is a prefix code over tokens, so distinct values never collide.
"""

from __future__ import annotations

import hashlib
from collections.abc import Mapping
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation

from .errors import InvalidValue

US = b"\x1f"
RS = b"\x1e"
ZERO_DIGEST = "0" * 64

_INSTANT_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"


def format_instant(value: datetime) -> str:
    if value.tzinfo is None:
        raise InvalidValue("instants must be timezone-aware")
    return value.astimezone(timezone.utc).strftime(_INSTANT_FORMAT)


def parse_instant(text: str) -> datetime:
    """Parse the stored form ``YYYY-MM-DDTHH:MM:SS.ffffffZ``."""
    try:
        return datetime.strptime(text, _INSTANT_FORMAT).replace(tzinfo=timezone.utc)
    except (TypeError, ValueError) as exc:
        raise InvalidValue(f"not a canonical instant: {text!r}") from exc


def parse_instant_loose(text: str) -> datetime:
    """Parse any ISO 8601 instant with an offset (CLI input)."""
    candidate = text.strip()
    if candidate.endswith(("Z", "z")):
        candidate = candidate[:-1] + "+00:00"
    try:
        value = datetime.fromisoformat(candidate)
    except ValueError as exc:
        raise InvalidValue(f"not an ISO 8601 instant: {text!r}") from exc
    if value.tzinfo is None:
        raise InvalidValue(f"instant needs a UTC offset: {text!r}")
    return normalize_instant(value)


def normalize_instant(value: datetime) -> datetime:
    if value.tzinfo is None:
        raise InvalidValue("instants must be timezone-aware")
    return value.astimezone(timezone.utc)


def _encode_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    if b"\x1e" in raw or b"\x1f" in raw:
        raise InvalidValue(f"string contains a separator byte: {value!r}")
    return raw


def encode_token(value: object) -> bytes:
    if value is None:
        return b"n"
    if isinstance(value, bool):
        return b"b1" if value else b"b0"
    if isinstance(value, int):
        return b"i" + str(value).encode("ascii")
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise InvalidValue(f"non-finite decimal: {value!r}")
        return b"d" + str(value).encode("ascii")
    if isinstance(value, str):
        return b"s" + _encode_str(value)
    if isinstance(value, datetime):
        return b"t" + format_instant(value).encode("ascii")
    if isinstance(value, Mapping):
        for key in value:
            if not isinstance(key, str):
                raise InvalidValue(f"mapping keys must be strings, got {key!r}")
        keys = sorted(value, key=_encode_str)
        parts = [b"m" + str(len(keys)).encode("ascii")]
        for key in keys:
            parts.append(encode_token(key))
            parts.append(encode_token(value[key]))
        return US.join(parts)
    if isinstance(value, (list, tuple)):
        parts = [b"l" + str(len(value)).encode("ascii")]
        parts.extend(encode_token(item) for item in value)
        return US.join(parts)
    # EntityId and other types that render to text
    render = getattr(value, "render", None)
    if callable(render):
        return b"s" + _encode_str(render())
    raise InvalidValue(f"cannot canonicalize {type(value).__name__}: {value!r}")


def encode_record(*fields: object) -> bytes:
    return US.join(encode_token(f) for f in fields) + RS


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def is_digest(text: object) -> bool:
    return (
        isinstance(text, str)
        and len(text) == 64
        and all(c in "0123456789abcdef" for c in text)
    )


# -- JSON codec for scalar attribute values ---------------------------------

def scalar_to_json(value: object) -> object:
    if isinstance(value, bool) or isinstance(value, (int, str)):
        return value
    if isinstance(value, Decimal):
        return {"$decimal": str(value)}
    if isinstance(value, datetime):
        return {"$timestamp": format_instant(value)}
    raise InvalidValue(f"not a scalar attribute value: {value!r}")


def scalar_from_json(value: object) -> object:
    if isinstance(value, bool) or isinstance(value, (int, str)):
        return value
    if isinstance(value, dict) and len(value) == 1:
        if "$decimal" in value:
            try:
                return Decimal(value["$decimal"])
            except (InvalidOperation, TypeError) as exc:
                raise InvalidValue(f"bad decimal: {value!r}") from exc
        if "$timestamp" in value:
            return parse_instant(value["$timestamp"])
    raise InvalidValue(f"not a JSON-encoded scalar: {value!r}")


def attrs_to_json(attrs: Mapping[str, object]) -> dict[str, object]:
    return {k: scalar_to_json(attrs[k]) for k in sorted(attrs)}


def attrs_from_json(doc: Mapping[str, object]) -> dict[str, object]:
    return {k: scalar_from_json(v) for k, v in doc.items()}


def utc(year: int, month: int = 1, day: int = 1, hour: int = 0, minute: int = 0,
        second: int = 0, microsecond: int = 0) -> datetime:
    return datetime(year, month, day, hour, minute, second, microsecond, tzinfo=timezone.utc)


__all__ = [
    "RS",
    "US",
    "ZERO_DIGEST",
    "attrs_from_json",
    "attrs_to_json",
    "digest",
    "encode_record",
    "encode_token",
    "format_instant",
    "is_digest",
    "normalize_instant",
    "parse_instant",
    "parse_instant_loose",
    "scalar_from_json",
    "scalar_to_json",
    "utc",
]

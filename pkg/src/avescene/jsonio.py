"""Canonical JSON and timestamp formatting for every file and wire schema.

All persistent artifacts (scene files, snapshots, sidecars, detection
files) use one canonical form so identical states serialize to identical
bytes: keys sorted, no whitespace, ASCII-only strings, floats at 17
significant digits (full double round-trip precision), timestamps as UTC
ISO-8601 with a trailing Z.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone

from .errors import ParseError


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float {x!r} cannot be serialized")
    return format(x, ".17g")


def canonical_dumps(obj) -> str:
    """Serialize to canonical JSON text (no trailing newline)."""
    out: list[str] = []
    _emit(obj, out)
    return "".join(out)


def canonical_dump_bytes(obj) -> bytes:
    return (canonical_dumps(obj) + "\n").encode("ascii")


def _emit(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"canonical JSON keys must be strings, got {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _emit(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} canonically")


def loads(text: str | bytes, what: str = "document") -> dict | list:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {what}: {exc}", path=f"line {exc.lineno}") from exc
    except (UnicodeDecodeError, ValueError) as exc:
        raise ParseError(f"invalid JSON in {what}: {exc}") from exc


def format_timestamp(dt: datetime) -> str:
    """UTC ISO-8601 with trailing Z; microseconds only when nonzero."""
    dt = dt.astimezone(timezone.utc) if dt.tzinfo else dt.replace(tzinfo=timezone.utc)
    base = dt.strftime("%Y-%m-%dT%H:%M:%S")
    if dt.microsecond:
        base += f".{dt.microsecond:06d}"
    return base + "Z"


def parse_timestamp(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1]
    for fmt in ("%Y-%m-%dT%H:%M:%S.%f", "%Y-%m-%dT%H:%M:%S"):
        try:
            return datetime.strptime(raw, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            continue
    raise ParseError(f"invalid timestamp {text!r} (expected ISO-8601 UTC with Z)")

"""Flat ``key = value`` records with dotted keys.

Used for field recipes, model descriptors, constants bundles and experiment
configs. One entry per line, ``#`` starts a comment.
"""
from __future__ import annotations

import hashlib
from typing import Mapping


class RecordError(ValueError):
    pass


def dumps(record: Mapping[str, object]) -> str:
    lines = []
    for key in sorted(record):
        value = record[key]
        if isinstance(value, float):
            text = repr(value)
        elif isinstance(value, (list, tuple)):
            text = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        else:
            text = str(value)
        if "\n" in text or "=" in key:
            raise RecordError(f"cannot serialize {key!r}")
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> dict[str, str]:
    """Parse a record into raw string values; typing is the caller's job."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RecordError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise RecordError(f"line {lineno}: empty key")
        if key in out:
            raise RecordError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def content_hash(record: Mapping[str, object]) -> str:
    """Git-style blob hash of the canonical serialization."""
    body = dumps(record).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]

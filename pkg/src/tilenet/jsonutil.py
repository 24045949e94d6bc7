"""JSON helpers: canonical form for digests, pretty form for humans."""

from __future__ import annotations

import hashlib
import json


def canonical_json(data) -> str:
    """Deterministic compact serialization (sorted keys, repr floats)."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def sha256_hex(data) -> str:
    """Content digest of the canonical serialization."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def pretty_json(data) -> str:
    """2-space indented JSON, but lists of plain numbers stay on one line.

    Weight matrices serialize as nested number lists; standard indenting
    would put every scalar on its own line and bury the structure.
    """
    out = []
    _emit(data, 0, out)
    out.append("\n")
    return "".join(out)


def _is_number_list(obj) -> bool:
    return isinstance(obj, list) and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj
    )


def _emit(obj, depth: int, out: list) -> None:
    pad = "  " * depth
    inner = "  " * (depth + 1)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            out.append(f"{inner}{json.dumps(key)}: ")
            _emit(value, depth + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, list):
        if _is_number_list(obj):
            out.append(json.dumps(obj))
            return
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(obj):
            out.append(inner)
            _emit(value, depth + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "]")
    else:
        out.append(json.dumps(obj))

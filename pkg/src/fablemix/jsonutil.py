"""Canonical JSON formatting, digests, and loose JSON extraction."""
from __future__ import annotations

import hashlib
import json
from typing import Any, Iterator


def canonical_dumps(obj: Any) -> str:
    """Serialize with sorted keys and stable float formatting (shortest
    round-trip repr). Byte-identical across calls for equal values."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def fixed_point_dumps(obj: Any, decimals: int = 6) -> str:
    """Canonical JSON with every float rendered as fixed-point with the given
    number of decimals. Keys sorted, two-space indent, trailing newline."""
    out: list[str] = []
    _write_fixed(obj, decimals, out, 0)
    out.append("\n")
    return "".join(out)


def _write_fixed(obj: Any, decimals: int, out: list[str], depth: int) -> None:
    pad = "  " * depth
    pad_in = "  " * (depth + 1)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, key in enumerate(keys):
            out.append(f"{pad_in}{json.dumps(key, ensure_ascii=False)}: ")
            _write_fixed(obj[key], decimals, out, depth + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad_in)
            _write_fixed(item, decimals, out, depth + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(f"{obj:.{decimals}f}")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    else:
        raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_value(obj: Any) -> str:
    """sha256 of the canonical JSON encoding, prefixed with the algorithm."""
    return "sha256:" + sha256_hex(canonical_dumps(obj).encode("utf-8"))


def digest_bytes(data: bytes) -> str:
    return "sha256:" + sha256_hex(data)


_DECODER = json.JSONDecoder()


def iter_json_objects(text: str) -> Iterator[dict]:
    """Yield every parseable JSON object embedded in free text, in document
    order. Handles nesting and fenced code blocks alike by decoding from each
    candidate ``{``."""
    idx = 0
    while True:
        start = text.find("{", idx)
        if start == -1:
            return
        try:
            obj, end = _DECODER.raw_decode(text, start)
        except json.JSONDecodeError:
            idx = start + 1
            continue
        if isinstance(obj, dict):
            yield obj
            idx = end
        else:
            idx = start + 1

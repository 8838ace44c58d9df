"""Flat key=value text files used for run configs and manifests.

One ``key=value`` pair per line; blank lines and ``#`` comments are ignored.
Values are kept as strings at parse time; typed accessors convert on demand
and raise KVError with the offending key on bad input.
"""

from __future__ import annotations

import os
from typing import Mapping

_MISSING = object()

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


class KVError(ValueError):
    """Malformed config text or an unconvertible value."""


def parse_kv(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise KVError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise KVError(f"line {lineno}: empty key")
        if key in pairs:
            raise KVError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def load_kv(path: str | os.PathLike) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv(fh.read())


def dump_kv(pairs: Mapping[str, object]) -> str:
    lines = []
    for key, value in pairs.items():
        if "=" in key or "\n" in key or not key.strip():
            raise KVError(f"unwritable key {key!r}")
        text = str(value)
        if "\n" in text:
            raise KVError(f"value of {key!r} contains a newline")
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def write_kv(path: str | os.PathLike, pairs: Mapping[str, object]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_kv(pairs))


def kv_str(kv: Mapping[str, str], key: str, default=_MISSING) -> str:
    if key in kv:
        return kv[key]
    if default is _MISSING:
        raise KVError(f"missing required key {key!r}")
    return default


def kv_int(kv: Mapping[str, str], key: str, default=_MISSING) -> int:
    raw = kv_str(kv, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return int(raw)
    except ValueError:
        raise KVError(f"{key}: expected an integer, got {raw!r}") from None


def kv_float(kv: Mapping[str, str], key: str, default=_MISSING) -> float:
    raw = kv_str(kv, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return float(raw)
    except ValueError:
        raise KVError(f"{key}: expected a number, got {raw!r}") from None


def kv_bool(kv: Mapping[str, str], key: str, default=_MISSING) -> bool:
    raw = kv_str(kv, key, default)
    if not isinstance(raw, str):
        return raw
    lowered = raw.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise KVError(f"{key}: expected a boolean, got {raw!r}")


def kv_floats(kv: Mapping[str, str], key: str, default=_MISSING) -> tuple[float, ...]:
    raw = kv_str(kv, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise KVError(f"{key}: expected comma-separated numbers, got {raw!r}") from None


def kv_ints(kv: Mapping[str, str], key: str, default=_MISSING) -> tuple[int, ...]:
    raw = kv_str(kv, key, default)
    if not isinstance(raw, str):
        return raw
    try:
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise KVError(f"{key}: expected comma-separated integers, got {raw!r}") from None


def kv_strs(kv: Mapping[str, str], key: str, default=_MISSING) -> tuple[str, ...]:
    raw = kv_str(kv, key, default)
    if not isinstance(raw, str):
        return raw
    return tuple(part.strip() for part in raw.split(",") if part.strip())

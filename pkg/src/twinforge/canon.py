"""Canonical JSON: sorted keys, 6-decimal fixed-point floats, ``\\n`` endings.

Byte-stable output is what makes digests, golden files and determinism checks
meaningful, so every file the engine writes goes through :func:`dumps`.
"""

from __future__ import annotations

import json
import math
from decimal import Decimal
from typing import Any

DECIMALS = 6


def q(x: float) -> float:
    """Round to the canonical precision (what a save/load cycle preserves)."""
    r = round(float(x), DECIMALS)
    return 0.0 if r == 0 else r


def qvec(v) -> tuple[float, ...]:
    return tuple(q(c) for c in v)


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {x!r} cannot be serialized")
    s = f"{x:.{DECIMALS}f}"
    if s.startswith("-") and s.strip("-0.") == "":
        s = s[1:]
    return s


def _encode(obj: Any, indent: int | None, level: int) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, Decimal):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        parts = [f"{json.dumps(str(k), ensure_ascii=False)}:{_sp(indent)}{_encode(v, indent, level + 1)}" for k, v in items]
        return _wrap("{", "}", parts, indent, level)
    if isinstance(obj, (list, tuple)):
        parts = [_encode(v, indent, level + 1) for v in obj]
        return _wrap("[", "]", parts, indent, level)
    raise TypeError(f"cannot canonically encode {type(obj).__name__}")


def _sp(indent: int | None) -> str:
    return " " if indent is not None else ""


def _wrap(open_: str, close: str, parts: list[str], indent: int | None, level: int) -> str:
    if not parts:
        return open_ + close
    if indent is None:
        return open_ + ",".join(parts) + close
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    return open_ + "\n" + ",\n".join(pad + p for p in parts) + "\n" + end + close


def dumps(obj: Any, indent: int | None = None) -> str:
    """Serialize ``obj`` canonically (no trailing newline)."""
    return _encode(obj, indent, 0)


def dump_document(obj: Any) -> str:
    """Pretty canonical document with a single trailing newline."""
    return dumps(obj, indent=2) + "\n"


def dump_lines(objs) -> str:
    """JSON Lines, one compact canonical object per line."""
    return "".join(dumps(o) + "\n" for o in objs)

"""Line-delimited JSON records shared by the curation and conversion inputs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Union


class SchemaError(ValueError):
    """Input that is readable but does not follow the record schema."""


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


Source = Union[str, Path, Iterable[str]]


def iter_lines(source: Source) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for non-blank lines of a path or line iterable."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = source
    for no, raw in enumerate(lines, 1):
        raw = raw.strip()
        if raw:
            yield no, raw


def decode(no: int, raw: str) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise SchemaError("record is not an object")
    return obj


def require_id(obj: dict, key: str) -> str:
    if key not in obj:
        raise SchemaError(f"missing field {key!r}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise SchemaError(f"{key} must be a string or integer")
    value = str(value)
    if not value or "/" in value or "\\" in value or value.startswith(".") or any(c.isspace() for c in value):
        raise SchemaError(f"{key} {value!r} is not usable as a file name")
    return value


def require_frame(obj: dict, key: str = "frame_id") -> int:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise SchemaError(f"{key} must be a positive integer")
    return value


def require_points(obj: dict, key: str = "polygon") -> tuple[tuple[float, float], ...]:
    pts = obj.get(key)
    if not isinstance(pts, list):
        raise SchemaError(f"missing field {key!r}")
    out = []
    for p in pts:
        if (not isinstance(p, (list, tuple)) or len(p) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)):
            raise SchemaError(f"bad vertex {p!r}")
        out.append((float(p[0]), float(p[1])))
    if len(out) < 3:
        raise SchemaError("degenerate polygon")
    return tuple(out)

"""Weight bundles: a directory of tensor text files plus ``manifest.txt``.

The manifest holds ``key=value`` metadata lines followed by one
``component=<name>`` line per tensor, in load order.
"""

from __future__ import annotations

from pathlib import Path

from .tensor import Tensor, dumps, loads

MANIFEST = "manifest.txt"


def save_bundle(directory, kind: str, tensors: dict[str, Tensor], meta: dict[str, str] | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"kind={kind}"]
    for key, value in (meta or {}).items():
        lines.append(f"{key}={value}")
    for name, t in tensors.items():
        lines.append(f"component={name}")
        (directory / f"{name}.tensor").write_text(dumps(t))
    (directory / MANIFEST).write_text("\n".join(lines) + "\n")
    return directory


def load_bundle(directory, kind: str) -> tuple[dict[str, Tensor], dict[str, str]]:
    directory = Path(directory)
    meta: dict[str, str] = {}
    tensors: dict[str, Tensor] = {}
    for raw in (directory / MANIFEST).read_text().splitlines():
        if not raw.strip():
            continue
        key, sep, value = raw.partition("=")
        if not sep:
            raise ValueError(f"bad manifest line: {raw!r}")
        if key == "component":
            tensors[value] = loads((directory / f"{value}.tensor").read_text())
        else:
            meta[key] = value
    if meta.pop("kind", None) != kind:
        raise ValueError(f"{directory} is not a {kind} bundle")
    return tensors, meta

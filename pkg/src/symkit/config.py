"""Toolkit configuration file.

An INI-style file with up to four sections::

    [aie]
    tau_uncert = 0.98
    scale_factors = 0.95, 1.05

    [sequence]
    motion = scale-ramp
    seed = 3

Every key must name a field of the matching dataclass; anything else is an
error. Omitted keys keep their defaults. Tuples are written comma separated,
piecewise segments as ``frames:vx:vy`` groups separated by ``;``.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .aie import AieConfig
from .curation import CurationConfig
from .metrics import MetricConfig
from .simulator import SequenceSpec

ENV_VAR = "SYMKIT_CONFIG"
SECTIONS = {"aie": AieConfig, "metrics": MetricConfig, "curation": CurationConfig, "sequence": SequenceSpec}


class ConfigError(ValueError):
    pass


@dataclass
class ToolkitConfig:
    aie: AieConfig = field(default_factory=AieConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    curation: CurationConfig = field(default_factory=CurationConfig)
    sequence: SequenceSpec = field(default_factory=SequenceSpec)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _convert(section: str, key: str, text: str, default):
    text = text.strip()
    if key == "segments":
        segs = []
        for part in text.split(";"):
            if part.strip():
                n, vx, vy = part.split(":")
                segs.append((int(n), float(vx), float(vy)))
        return tuple(segs)
    if key == "focus" or key == "frames_root":
        if text.lower() in ("", "none"):
            return None
        return _floats(text) if key == "focus" else Path(text)
    if isinstance(default, bool):
        low = text.lower()
        if low not in ("true", "false", "yes", "no", "on", "off", "1", "0"):
            raise ValueError(f"expected a boolean, got {text!r}")
        return low in ("true", "yes", "on", "1")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        vals = _floats(text)
        if key == "frame_size":
            return tuple(int(v) for v in vals)
        return vals
    if isinstance(default, Path):
        return Path(text)
    return text


def parse_config(text: str, origin: str = "<config>") -> ToolkitConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="\0none")
    cp.optionxform = str  # keys are case sensitive field names
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    out = {}
    for name, cls in SECTIONS.items():
        if not cp.has_section(name):
            out[name] = cls()
            continue
        defaults = cls()
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in cp.items(name):
            if key not in known:
                raise ConfigError(f"{origin}: unknown key {key!r} in [{name}]")
            try:
                kwargs[key] = _convert(name, key, raw, getattr(defaults, key))
            except ValueError as exc:
                raise ConfigError(f"{origin}: [{name}] {key}: {exc}") from None
        try:
            out[name] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{origin}: [{name}] {exc}") from None
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"{origin}: unknown section [{unknown[0]}]")
    return ToolkitConfig(**out)


def load_config(path: Optional[str] = None) -> ToolkitConfig:
    """Read ``path``, else ``$SYMKIT_CONFIG``, else return the defaults."""
    path = path or os.environ.get(ENV_VAR) or None
    if path is None:
        return ToolkitConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"), str(path))

"""Axis-aligned boxes in pixel ``(x, y, w, h)`` form."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"negative box size: {self}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        # zero-area placeholders sit at their corner, which this also yields
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def astuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


ZERO_BOX = BBox(0.0, 0.0, 0.0, 0.0)


def intersection_area(a: BBox, b: BBox) -> float:
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def format_number(v: float) -> str:
    """Integers without a decimal point, everything else as the shortest round-trip repr."""
    if v == int(v):
        return str(int(v))
    return repr(float(v))


def format_box(b: BBox) -> str:
    return ",".join(format_number(v) for v in b.astuple())


def parse_box(line: str) -> BBox:
    parts = line.replace("\t", ",").replace(" ", ",").split(",")
    vals = [float(p) for p in parts if p]
    if len(vals) != 4:
        raise ValueError(f"expected 4 box values, got {line!r}")
    return BBox(*vals)

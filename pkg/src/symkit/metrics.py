"""One-pass-evaluation metrics for single-object tracking.

Conventions follow the OTB/LaSOT toolkits: a 21-point IoU grid for success
AUC, a 20 px centre-error threshold for precision and 0.2 for the size
normalised variant. All thresholds are inclusive.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .boxes import BBox, iou  # noqa: F401  (re-exported)
from .convert import id_agnostic_match

MODES = ("strict-id", "id-agnostic")


@dataclass(frozen=True)
class MetricConfig:
    iou_thresholds: tuple[float, ...] = tuple(i / 20 for i in range(21))
    precision_threshold_px: float = 20.0
    norm_precision_threshold: float = 0.2
    op_threshold: float = 0.75

    def __post_init__(self):
        ts = tuple(float(t) for t in self.iou_thresholds)
        object.__setattr__(self, "iou_thresholds", ts)
        if not ts or list(ts) != sorted(ts) or ts[0] < 0 or ts[-1] > 1:
            raise ValueError("IoU thresholds must be a non-empty ascending grid inside [0, 1]")


class LengthMismatch(ValueError):
    pass


def center_error(pred: BBox, gt: BBox) -> float:
    (px, py), (gx, gy) = pred.center, gt.center
    return math.hypot(px - gx, py - gy)


def norm_center_error(pred: BBox, gt: BBox) -> float:
    if gt.w <= 0 or gt.h <= 0:
        raise ValueError(f"normalised error needs a ground truth with positive size, got {gt}")
    (px, py), (gx, gy) = pred.center, gt.center
    return math.sqrt(((px - gx) / gt.w) ** 2 + ((py - gy) / gt.h) ** 2)


def _nonempty(xs, what):
    if len(xs) == 0:
        raise ValueError(f"cannot score an empty {what}")


def success_curve(ious: Sequence[float], cfg: MetricConfig) -> list[float]:
    _nonempty(ious, "tracklet")
    n = len(ious)
    return [sum(1 for v in ious if v >= t) / n for t in cfg.iou_thresholds]


def success_auc(ious: Sequence[float], cfg: MetricConfig) -> float:
    curve = success_curve(ious, cfg)
    return math.fsum(curve) / len(curve)


def precision_at(errors: Sequence[float], threshold: float) -> float:
    _nonempty(errors, "error list")
    return sum(1 for e in errors if e <= threshold) / len(errors)


def op_at(ious: Sequence[float], threshold: float) -> float:
    _nonempty(ious, "IoU list")
    return sum(1 for v in ious if v >= threshold) / len(ious)


@dataclass
class EvalPair:
    name: str
    gt: list[BBox]
    pred: list[BBox]
    # all candidate boxes per frame for ID-agnostic scoring; defaults to [pred[i]]
    pool: Optional[list[list[BBox]]] = None


@dataclass
class TrackletScore:
    name: str
    frames: int
    auc: float
    p: float
    p_norm: float
    op75: float
    curve: list[float] = field(default_factory=list, repr=False)


@dataclass
class EvalReport:
    mode: str
    rows: list[TrackletScore]
    config: MetricConfig = field(default_factory=MetricConfig)

    def aggregates(self) -> dict[str, float]:
        """Unweighted means over tracklets."""
        n = len(self.rows)
        if n == 0:
            return {"tracklets": 0, "auc": 0.0, "p": 0.0, "p_norm": 0.0, "op75": 0.0}
        return {
            "tracklets": n,
            "auc": math.fsum(r.auc for r in self.rows) / n,
            "p": math.fsum(r.p for r in self.rows) / n,
            "p_norm": math.fsum(r.p_norm for r in self.rows) / n,
            "op75": math.fsum(r.op75 for r in self.rows) / n,
        }

    def success_curve(self) -> list[tuple[float, float]]:
        n = len(self.rows)
        return [(t, math.fsum(r.curve[i] for r in self.rows) / n)
                for i, t in enumerate(self.config.iou_thresholds)] if n else []


def score_tracklet(name: str, pred: Sequence[BBox], gt: Sequence[BBox], cfg: MetricConfig) -> TrackletScore:
    if len(pred) != len(gt):
        raise LengthMismatch(f"{name}: {len(pred)} predictions for {len(gt)} ground-truth frames")
    # frames whose ground truth has no area carry no target and are not scored
    valid = [(p, g) for p, g in zip(pred, gt) if g.w > 0 and g.h > 0]
    if not valid:
        raise ValueError(f"{name}: no ground-truth frame with positive area")
    ious = [iou(p, g) for p, g in valid]
    errs = [center_error(p, g) for p, g in valid]
    nerrs = [norm_center_error(p, g) for p, g in valid]
    curve = success_curve(ious, cfg)
    return TrackletScore(
        name,
        len(valid),
        math.fsum(curve) / len(curve),
        precision_at(errs, cfg.precision_threshold_px),
        precision_at(nerrs, cfg.norm_precision_threshold),
        op_at(ious, cfg.op_threshold),
        curve,
    )


def evaluate(pairs: Sequence[EvalPair], cfg: MetricConfig = MetricConfig(), mode: str = "strict-id") -> EvalReport:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    rows = []
    for pair in pairs:
        if len(pair.pred) != len(pair.gt):
            raise LengthMismatch(f"{pair.name}: {len(pair.pred)} predictions for {len(pair.gt)} ground-truth frames")
        pred = pair.pred
        if mode == "id-agnostic":
            pool = pair.pool if pair.pool is not None else [[p] for p in pair.pred]
            if len(pool) != len(pair.gt):
                raise LengthMismatch(f"{pair.name}: prediction pool covers {len(pool)} of {len(pair.gt)} frames")
            pred = [id_agnostic_match(cands, g)[0] if g.area > 0 else p
                    for cands, g, p in zip(pool, pair.gt, pair.pred)]
        rows.append(score_tracklet(pair.name, pred, pair.gt, cfg))
    return EvalReport(mode, rows, cfg)


REPORT_COLUMNS = ("tracklet", "frames", "auc", "p", "p_norm", "op75")


def _f(v: float) -> str:
    return f"{v:.6f}"


def report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(REPORT_COLUMNS)
    for r in report.rows:
        out.writerow([r.name, r.frames, _f(r.auc), _f(r.p), _f(r.p_norm), _f(r.op75)])
    return buf.getvalue()


def summary_text(report: EvalReport) -> str:
    agg = report.aggregates()
    lines = [f"mode={report.mode}", f"tracklets={agg['tracklets']}"]
    lines += [f"{k}={_f(agg[k])}" for k in ("auc", "p", "p_norm", "op75")]
    return "\n".join(lines) + "\n"


def curve_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(("iou_threshold", "success_rate"))
    for t, v in report.success_curve():
        out.writerow([_f(t), _f(v)])
    return buf.getvalue()


def read_report_csv(text: str) -> list[TrackletScore]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(TrackletScore(rec["tracklet"], int(rec["frames"]), float(rec["auc"]),
                                  float(rec["p"]), float(rec["p_norm"]), float(rec["op75"])))
    return rows

"""Synthetic tracking sequences and a closed-loop tracker harness.

The "network" is replaced by an oracle that renders Gaussian response bumps
for the target and any distractors inside the current search region, and
regresses the target size only within a bounded range of the size it was
asked to look for. Everything is driven by ``random.Random(seed)`` so a run is
reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
import random
from array import array
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from ._backend import kernels as _k
from .aie import (
    AieConfig,
    Candidate,
    KalmanState,
    ScoreMap,
    aie_step,
    hann_confidence,
    search_region,
    src,
)
from .boxes import BBox, iou
from .cec import CecWeights, cec_forward, resample_nearest
from .metrics import MetricConfig, success_auc
from .ptr import PtrWeights, ptr_forward
from .tensor import Tensor

MOTIONS = ("constant-velocity", "scale-ramp", "piecewise")
DISTRACTOR_LAWS = ("fixed", "follow")


@dataclass(frozen=True)
class SequenceSpec:
    length: int = 60
    motion: str = "scale-ramp"
    start: tuple[float, float] = (240.0, 150.0)
    size: tuple[float, float] = (64.0, 16.0)
    velocity: tuple[float, float] = (2.0, 1.0)
    scale_rate: float = 1.03
    focus: Optional[tuple[float, float]] = None  # expansion centre, defaults to frame centre
    segments: tuple = ()  # piecewise: ((frames, vx, vy), ...)
    noise_std: float = 1.0
    distractors: int = 0
    distractor_law: str = "fixed"
    distractor_offset: tuple[float, float] = (60.0, 0.0)
    distractor_amp: float = 0.9
    frame_size: tuple[int, int] = (640, 360)
    seed: int = 0
    map_size: int = 49
    sigma_scale: float = 0.25
    size_capture: float = 1.01
    scale_tolerance: float = 0.25
    features: bool = True

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("a sequence needs at least 2 frames")
        if self.motion not in MOTIONS:
            raise ValueError(f"motion must be one of {MOTIONS}, got {self.motion!r}")
        if self.motion == "piecewise" and not self.segments:
            raise ValueError("piecewise motion needs segments")
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise ValueError("initial target size must be positive")
        if self.scale_rate <= 0 or self.noise_std < 0 or self.distractors < 0:
            raise ValueError("scale_rate must be > 0, noise_std and distractors >= 0")
        if self.distractor_law not in DISTRACTOR_LAWS:
            raise ValueError(f"distractor_law must be one of {DISTRACTOR_LAWS}")
        if self.map_size < 3 or self.size_capture < 1.0 or self.sigma_scale <= 0 or self.scale_tolerance <= 0:
            raise ValueError("map_size >= 3, size_capture >= 1, sigma_scale > 0 and scale_tolerance > 0 required")


@dataclass(frozen=True)
class Frame:
    frame_id: int
    gt: BBox
    distractors: tuple[BBox, ...]
    jitter: tuple[float, float]  # observation noise on the response peak


def _velocity_at(spec: SequenceSpec, t: int) -> tuple[float, float]:
    # velocity applied when stepping from frame t to t + 1 (t is 0-based)
    done = 0
    for frames, vx, vy in spec.segments:
        done += frames
        if t < done:
            return (vx, vy)
    return spec.segments[-1][1:] if spec.segments else (0.0, 0.0)


def gen_sequence(spec: SequenceSpec) -> list[Frame]:
    rng = random.Random(spec.seed)
    fx, fy = spec.focus if spec.focus is not None else (spec.frame_size[0] / 2.0, spec.frame_size[1] / 2.0)
    w0, h0 = spec.size
    frames = []
    cx, cy = spec.start
    n = spec.distractors
    offsets = []
    for k in range(n):
        a = 2.0 * math.pi * k / n
        ox, oy = spec.distractor_offset
        offsets.append((ox * math.cos(a) - oy * math.sin(a), ox * math.sin(a) + oy * math.cos(a)))
    for t in range(spec.length):
        if spec.motion == "scale-ramp":
            g = spec.scale_rate ** t
            w, h = w0 * g, h0 * g
            cx = fx + (spec.start[0] - fx) * g
            cy = fy + (spec.start[1] - fy) * g
        else:
            w, h = w0, h0
            if t > 0:
                vx, vy = spec.velocity if spec.motion == "constant-velocity" else _velocity_at(spec, t - 1)
                cx, cy = cx + vx, cy + vy
        gt = BBox.from_center(cx, cy, w, h)
        if spec.distractor_law == "fixed":
            anchors = [(spec.start[0] + ox, spec.start[1] + oy) for ox, oy in offsets]
        else:
            anchors = [(cx + ox, cy + oy) for ox, oy in offsets]
        distractors = tuple(BBox.from_center(ax, ay, w, h) for ax, ay in anchors)
        jitter = (rng.gauss(0.0, spec.noise_std), rng.gauss(0.0, spec.noise_std)) if spec.noise_std > 0 else (0.0, 0.0)
        frames.append(Frame(t + 1, gt, distractors, jitter))
    return frames


class SyntheticOracle:
    """Stands in for the tracker network on synthetic frames."""

    def __init__(self, spec: SequenceSpec):
        self.map_size = spec.map_size
        self.sigma_scale = spec.sigma_scale
        self.size_capture = spec.size_capture
        self.distractor_amp = spec.distractor_amp
        self.scale_tolerance = spec.scale_tolerance

    def match(self, box: BBox, expected_wh: Optional[tuple[float, float]]) -> float:
        """Response attenuation for a target seen at the wrong scale; 1.0 when matched."""
        if expected_wh is None or box.area <= 0:
            return 1.0
        r = math.log(math.sqrt(box.area / (expected_wh[0] * expected_wh[1])))
        return math.exp(-r * r / (2.0 * self.scale_tolerance ** 2))

    def score_map(self, region: BBox, frame: Frame, scale: float = 1.0,
                  expected_wh: Optional[tuple[float, float]] = None) -> ScoreMap:
        g = frame.gt
        bumps = array("d")
        cx, cy = g.center
        bumps.extend((cx + frame.jitter[0], cy + frame.jitter[1],
                      self.sigma_scale * math.sqrt(g.area), self.match(g, expected_wh)))
        for d in frame.distractors:
            dx, dy = d.center
            bumps.extend((dx, dy, self.sigma_scale * math.sqrt(d.area),
                          self.distractor_amp * self.match(d, expected_wh)))
        n = self.map_size
        cell = region.w / n
        data = _k.gaussian_map(region.x, region.y, cell, n, n, bumps)
        return ScoreMap(Tensor((n, n), data), region, scale)

    def respond(self, region: BBox, frame: Frame, expected_wh: tuple[float, float],
                scale: float = 1.0) -> tuple[Candidate, ScoreMap]:
        smap = self.score_map(region, frame, scale, expected_wh)
        conf, (r, c) = hann_confidence(smap)
        n = self.map_size
        cell = region.w / n
        col = _refine(smap.scores, r, c, axis=1)
        row = _refine(smap.scores, r, c, axis=0)
        px = region.x + (col + 0.5) * cell
        py = region.y + (row + 0.5) * cell
        ew, eh = expected_wh
        gw, gh = frame.gt.w, frame.gt.h
        gx, gy = frame.gt.center
        inside = region.x <= gx <= region.x + region.w and region.y <= gy <= region.y + region.h
        if inside:
            lo, hi = 1.0 / self.size_capture, self.size_capture
            w = ew * min(max(gw / ew, lo), hi)
            h = eh * min(max(gh / eh, lo), hi)
        else:
            w, h = ew, eh
        return Candidate(conf, BBox.from_center(px, py, w, h), scale, region), smap


def _refine(scores: Tensor, r: int, c: int, axis: int) -> float:
    """Sub-cell peak position along one axis from a parabola through log-scores.

    Exact for an isolated Gaussian; clamped to the map extent.
    """
    h, w = scores.shape
    n = w if axis == 1 else h
    at = c if axis == 1 else r
    mid = min(max(at, 1), n - 2)

    def val(i):
        return scores.data[r * w + i] if axis == 1 else scores.data[i * w + c]

    a, b, d = val(mid - 1), val(mid), val(mid + 1)
    if a <= 0.0 or b <= 0.0 or d <= 0.0:
        return float(at)
    la, lb, ld = math.log(a), math.log(b), math.log(d)
    denom = la - 2.0 * lb + ld
    if denom >= 0.0:
        return float(at)
    pos = mid + 0.5 * (la - ld) / denom
    return min(max(pos, -0.5), n - 0.5)


@dataclass
class FrameRecord:
    frame: int
    confidence: float
    rescue_fired: bool
    scale: float
    src: float
    box: BBox
    iou: float
    measured: tuple[float, float]
    energy: float = 0.0


@dataclass
class SimResult:
    frames: list[Frame]
    records: list[FrameRecord]
    summary: dict = field(default_factory=dict)

    @property
    def predictions(self) -> list[BBox]:
        return [r.box for r in self.records]


class _FeatureProbe:
    """Pushes small tensors derived from each score map through PTR and CEC."""

    channels, grid, text_grid, text_dim, dim, heads = 4, 8, 4, 6, 8, 2

    def __init__(self, first: ScoreMap, seed: int):
        self.ptr = PtrWeights.random(self.channels, seed=seed + 11)
        self.cec = CecWeights.random(self.text_dim, dim=self.dim, heads=self.heads, seed=seed + 13)
        self.template = self._tokens(first, self.grid, self.channels)
        self.z_txt = self._tokens(first, self.text_grid, self.text_dim)

    @staticmethod
    def _tokens(smap: ScoreMap, g: int, c: int) -> Tensor:
        pooled = resample_nearest(smap.scores, g, g).data
        return Tensor((g * g, c), [v * (j + 1) / c for v in pooled for j in range(c)])

    def energy(self, smap: ScoreMap) -> float:
        g = self.grid
        pooled = resample_nearest(smap.scores, g, g).data
        f_x = Tensor((self.channels, g, g), [v * (ch + 1) / self.channels for ch in range(self.channels) for v in pooled])
        rect = ptr_forward(self.template, f_x, self.ptr)
        x_txt = self._tokens(smap, self.text_grid, self.text_dim)
        out = cec_forward(self.z_txt, x_txt, rect.f_hat, self.text_grid, self.text_grid, self.cec)
        for m in (rect.mask.data, out.m_calib.data):
            if not all(0.0 < v < 1.0 for v in m):
                raise AssertionError("gating mask left (0, 1)")
        return math.fsum(v * v for v in out.f_calib.data)


def simulate_track(spec: SequenceSpec, aie_cfg: AieConfig, use_aie: bool = True,
                   frames: Optional[Sequence[Frame]] = None) -> SimResult:
    frames = list(frames) if frames is not None else gen_sequence(spec)
    oracle = SyntheticOracle(spec)
    init = frames[0].gt
    state = KalmanState.initial(init.center)
    region0 = search_region(init.center, (init.w, init.h), 1.0, aie_cfg)
    probe = None
    energy0 = 0.0
    if spec.features:
        first = oracle.score_map(region0, frames[0])
        probe = _FeatureProbe(first, spec.seed)
        energy0 = probe.energy(first)
    records = [FrameRecord(1, 1.0, False, 1.0, src(region0, init), init, 1.0, init.center, energy0)]
    est = init
    for frame in frames[1:]:
        wh = (est.w, est.h)
        region = search_region(est.center, wh, 1.0, aie_cfg)
        base, smap = oracle.respond(region, frame, wh, 1.0)
        if use_aie:
            def rescue(s, _c=est.center, _wh=wh, _f=frame):
                r = search_region(_c, _wh, s, aie_cfg)
                return oracle.respond(r, _f, (_wh[0] * s, _wh[1] * s), s)[0]

            est, state, diag = aie_step(state, base, rescue, aie_cfg, frame.gt)
            rec = FrameRecord(frame.frame_id, diag.confidence, diag.rescue_fired, diag.scale,
                              diag.src, est, 0.0, diag.measured_center)
        else:
            est = base.box
            rec = FrameRecord(frame.frame_id, base.confidence, False, 1.0, src(region, frame.gt),
                              est, 0.0, est.center)
        rec.iou = iou(est, frame.gt)
        if probe is not None:
            rec.energy = probe.energy(smap)
        records.append(rec)
    result = SimResult(frames, records)
    result.summary = summarize(result)
    return result


def summarize(result: SimResult) -> dict:
    recs = result.records
    n = len(recs)
    errs = []
    for rec, fr in zip(recs, result.frames):
        (px, py), (gx, gy) = rec.box.center, fr.gt.center
        errs.append(math.hypot(px - gx, py - gy))
    return {
        "frames": n,
        "mean_iou": math.fsum(r.iou for r in recs) / n,
        "mean_src": math.fsum(r.src for r in recs) / n,
        "auc": success_auc([r.iou for r in recs], MetricConfig()),
        "mean_center_error": math.fsum(errs) / n,
        "rescue_rate": sum(r.rescue_fired for r in recs) / n,
    }


def center_mse(points: Sequence[tuple[float, float]], frames: Sequence[Frame]) -> float:
    total = 0.0
    for (px, py), fr in zip(points, frames):
        gx, gy = fr.gt.center
        total += (px - gx) ** 2 + (py - gy) ** 2
    return total / len(frames)


DIAG_COLUMNS = ("frame", "confidence", "rescue_fired", "scale", "src", "x", "y", "w", "h", "iou", "energy")


def _f(v: float) -> str:
    return f"{v:.6f}"


def diagnostics_csv(result: SimResult) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(DIAG_COLUMNS)
    for r in result.records:
        out.writerow([r.frame, _f(r.confidence), int(r.rescue_fired), _f(r.scale), _f(r.src),
                      _f(r.box.x), _f(r.box.y), _f(r.box.w), _f(r.box.h), _f(r.iou), _f(r.energy)])
    return buf.getvalue()


DEFAULT_GRID = (
    (0.97, 0.98, 0.99),
    ((0.90, 1.10), (0.95, 1.05), (0.985, 1.015)),
    (0.4, 0.5, 0.6),
)

SWEEP_COLUMNS = ("tau_uncert", "scale_factors", "alpha_kalman", "seeds",
                 "mean_iou", "mean_src", "auc", "mean_center_error", "rescue_rate")


def sweep_aie(spec: SequenceSpec, base_cfg: AieConfig, taus: Sequence[float],
              scale_sets: Sequence[Sequence[float]], alphas: Sequence[float],
              seeds: Sequence[int] = (0,)) -> list[dict]:
    """Vary the three AIE knobs over a full grid, averaging summaries over seeds."""
    sequences = {s: gen_sequence(replace(spec, seed=s)) for s in seeds}
    rows = []
    for tau in taus:
        for scales in scale_sets:
            for alpha in alphas:
                cfg = replace(base_cfg, tau_uncert=tau, scale_factors=tuple(scales), alpha_kalman=alpha)
                sums: dict[str, float] = {}
                for s in seeds:
                    res = simulate_track(replace(spec, seed=s), cfg, True, sequences[s])
                    for key in SWEEP_COLUMNS[4:]:
                        sums[key] = sums.get(key, 0.0) + res.summary[key]
                row = {"tau_uncert": tau, "scale_factors": tuple(scales), "alpha_kalman": alpha,
                       "seeds": len(seeds)}
                row.update({k: v / len(seeds) for k, v in sums.items()})
                rows.append(row)
    return rows


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(SWEEP_COLUMNS)
    for row in rows:
        out.writerow([repr(row["tau_uncert"]), ";".join(repr(s) for s in row["scale_factors"]),
                      repr(row["alpha_kalman"]), row["seeds"]]
                     + [_f(row[k]) for k in SWEEP_COLUMNS[4:]])
    return buf.getvalue()

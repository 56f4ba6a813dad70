"""Training-free adaptive inference: windowed confidence, confidence-gated
multi-scale re-search and constant-velocity Kalman regularisation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

from ._backend import kernels as _k
from .boxes import BBox, intersection_area
from .tensor import Tensor

Center = tuple[float, float]


@dataclass(frozen=True)
class AieConfig:
    tau_uncert: float = 0.98
    scale_factors: tuple[float, ...] = (0.95, 1.05)
    alpha_kalman: float = 0.5
    search_factor: float = 4.0
    process_noise: float = 0.01
    measurement_noise: float = 1.0
    update_with: str = "fused"  # or "raw": feed the unblended measurement to the filter

    def __post_init__(self):
        object.__setattr__(self, "scale_factors", tuple(float(s) for s in self.scale_factors))
        if not 0.0 < self.tau_uncert <= 1.0:
            raise ValueError(f"tau_uncert must be in (0, 1], got {self.tau_uncert}")
        if not 0.0 <= self.alpha_kalman <= 1.0:
            raise ValueError(f"alpha_kalman must be in [0, 1], got {self.alpha_kalman}")
        if any(s <= 0 for s in self.scale_factors):
            raise ValueError(f"scale factors must be positive, got {self.scale_factors}")
        if self.search_factor <= 0:
            raise ValueError("search_factor must be positive")
        if self.process_noise < 0 or self.measurement_noise <= 0:
            raise ValueError("process noise must be >= 0 and measurement noise > 0")
        if self.update_with not in ("fused", "raw"):
            raise ValueError(f"update_with must be 'fused' or 'raw', got {self.update_with!r}")


@dataclass(frozen=True)
class ScoreMap:
    scores: Tensor  # H×W
    region: BBox
    scale_used: float = 1.0


def hann_confidence(s: ScoreMap) -> tuple[float, tuple[int, int]]:
    """Peak of the score map after multiplying by a separable Hann window.

    Ties resolve to the smallest row, then the smallest column.
    """
    if s.scores.ndim != 2:
        raise ValueError(f"score map must be H×W, got {s.scores.shape}")
    h, w = s.scores.shape
    value, r, c = _k.hann_peak(s.scores.data, h, w)
    return value, (r, c)


def needs_rescue(c: float, cfg: AieConfig) -> bool:
    return c < cfg.tau_uncert


class Candidate(NamedTuple):
    confidence: float
    box: BBox
    scale: float = 1.0
    region: Optional[BBox] = None


def multiscale_select(candidates: Sequence[Candidate]) -> Candidate:
    """Highest confidence wins; ties go to scale 1.0, then to the earlier entry."""
    if not candidates:
        raise ValueError("no candidates to select from")
    best = candidates[0]
    for cand in candidates[1:]:
        if cand.confidence > best.confidence:
            best = cand
        elif cand.confidence == best.confidence and cand.scale == 1.0 and best.scale != 1.0:
            best = cand
    return best


@dataclass(frozen=True)
class KalmanState:
    s: tuple[float, float, float, float]  # cx, cy, vx, vy
    P: tuple[tuple[float, ...], ...]

    @classmethod
    def initial(cls, center: Center, p0: Sequence[float] = (1.0, 1.0, 10.0, 10.0)) -> "KalmanState":
        return cls((float(center[0]), float(center[1]), 0.0, 0.0), _diag(p0))

    @property
    def center(self) -> Center:
        return (self.s[0], self.s[1])


def _diag(v):
    return tuple(tuple(float(v[i]) if i == j else 0.0 for j in range(4)) for i in range(4))


def _mm(a, b):
    return tuple(
        tuple(sum(a[i][t] * b[t][j] for t in range(len(b))) for j in range(len(b[0])))
        for i in range(len(a))
    )


def _t(a):
    return tuple(zip(*a))


def _symmetrize(p):
    return tuple(tuple(0.5 * (p[i][j] + p[j][i]) for j in range(4)) for i in range(4))


_F = ((1.0, 0.0, 1.0, 0.0), (0.0, 1.0, 0.0, 1.0), (0.0, 0.0, 1.0, 0.0), (0.0, 0.0, 0.0, 1.0))


def kalman_predict(state: KalmanState, q: float) -> KalmanState:
    cx, cy, vx, vy = state.s
    fp = _mm(_mm(_F, state.P), _t(_F))
    p = tuple(tuple(fp[i][j] + (q if i == j else 0.0) for j in range(4)) for i in range(4))
    return KalmanState((cx + vx, cy + vy, vx, vy), p)


def kalman_update(state: KalmanState, z: Center, r: float) -> KalmanState:
    P = state.P
    s00, s01 = P[0][0] + r, P[0][1]
    s10, s11 = P[1][0], P[1][1] + r
    det = s00 * s11 - s01 * s10
    if det == 0.0:
        raise ZeroDivisionError("singular innovation covariance")
    inv = ((s11 / det, -s01 / det), (-s10 / det, s00 / det))
    # gain = P H^T S^-1, with H selecting the centre coordinates
    pht = tuple((row[0], row[1]) for row in P)
    gain = _mm(pht, inv)
    y0 = z[0] - state.s[0]
    y1 = z[1] - state.s[1]
    s = tuple(state.s[i] + gain[i][0] * y0 + gain[i][1] * y1 for i in range(4))
    i_kh = tuple(
        tuple((1.0 if i == j else 0.0) - (gain[i][j] if j < 2 else 0.0) for j in range(4))
        for i in range(4)
    )
    return KalmanState(s, _symmetrize(_mm(i_kh, P)))


def fuse_estimate(z_center: Center, predicted_center: Center, alpha: float) -> Center:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return (
        alpha * z_center[0] + (1.0 - alpha) * predicted_center[0],
        alpha * z_center[1] + (1.0 - alpha) * predicted_center[1],
    )


def search_region(center: Center, target_wh: tuple[float, float], scale: float, cfg: AieConfig) -> BBox:
    w, h = target_wh
    if w <= 0 or h <= 0:
        raise ValueError(f"target size must be positive, got {target_wh}")
    side = cfg.search_factor * math.sqrt(w * h) * scale
    return BBox.from_center(center[0], center[1], side, side)


def src(b_search: BBox, b_gt: BBox) -> float:
    """Fraction of the ground-truth area that the search window covers."""
    if b_gt.area <= 0:
        raise ValueError("search region coverage is undefined for a zero-area ground truth")
    return min(1.0, intersection_area(b_search, b_gt) / b_gt.area)


@dataclass
class StepDiagnostics:
    base_confidence: float
    confidence: float
    rescue_fired: bool
    scale: float
    measured_center: Center
    predicted_center: Center
    src: Optional[float] = None
    candidates: list = field(default_factory=list)


def aie_step(
    state: KalmanState,
    base: Candidate,
    rescue: Callable[[float], Candidate],
    cfg: AieConfig,
    gt: Optional[BBox] = None,
) -> tuple[BBox, KalmanState, StepDiagnostics]:
    """One frame of adaptive inference.

    ``rescue(scale)`` re-runs the tracker on a search region rescaled by
    ``scale`` and is only called when the base confidence is below threshold.
    """
    candidates = [base]
    fired = needs_rescue(base.confidence, cfg)
    if fired:
        candidates.extend(rescue(s) for s in cfg.scale_factors)
    chosen = multiscale_select(candidates)

    predicted = kalman_predict(state, cfg.process_noise)
    z = chosen.box.center
    fused = fuse_estimate(z, predicted.center, cfg.alpha_kalman)
    posterior = kalman_update(predicted, fused if cfg.update_with == "fused" else z, cfg.measurement_noise)
    if fused == z:
        out = chosen.box
    else:
        out = BBox.from_center(fused[0], fused[1], chosen.box.w, chosen.box.h)

    coverage = None
    if gt is not None and chosen.region is not None and gt.area > 0:
        coverage = src(chosen.region, gt)
    diag = StepDiagnostics(base.confidence, chosen.confidence, fired, chosen.scale, z,
                           predicted.center, coverage, candidates)
    return out, posterior, diag

"""Convert consolidated video-text-spotting output into per-object SOT
prediction files, and pair those files with curated ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .boxes import ZERO_BOX, BBox, format_box, iou, parse_box
from .records import SchemaError, Source, decode, iter_lines, require_frame, require_id, require_points


class EmptyTrajectory(ValueError):
    pass


@dataclass
class VtsResult:
    video_id: str
    frame_count: int
    detections: dict[str, list[tuple[int, BBox]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError("frame_count must be positive")


def _box_from(obj: dict) -> BBox:
    if "bbox" in obj:
        b = obj["bbox"]
        if (not isinstance(b, list) or len(b) != 4
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in b)):
            raise SchemaError("bbox must be [x, y, w, h]")
        if b[2] < 0 or b[3] < 0:
            raise SchemaError("bbox has negative size")
        return BBox(*(float(v) for v in b))
    pts = require_points(obj)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return BBox(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))


def parse_vts(source: Source) -> list[VtsResult]:
    """Header lines ``{"video_id", "frame_count"}`` open a video; detection lines carry
    ``video_id``, ``frame_id``, ``object_id`` and a ``bbox`` or ``polygon``.

    Raises ``SchemaError`` naming the offending line.
    """
    videos: dict[str, VtsResult] = {}
    for no, raw in iter_lines(source):
        try:
            obj = decode(no, raw)
            video = require_id(obj, "video_id")
            if "frame_count" in obj:
                if video in videos:
                    raise SchemaError(f"second header for video {video}")
                count = obj["frame_count"]
                if isinstance(count, bool) or not isinstance(count, int) or count < 1:
                    raise SchemaError("frame_count must be a positive integer")
                videos[video] = VtsResult(video, count)
                continue
            if video not in videos:
                raise SchemaError(f"detection for video {video} before its frame_count header")
            res = videos[video]
            frame = require_frame(obj)
            if frame > res.frame_count:
                raise SchemaError(f"frame {frame} beyond frame_count {res.frame_count}")
            res.detections.setdefault(require_id(obj, "object_id"), []).append((frame, _box_from(obj)))
        except SchemaError as exc:
            raise SchemaError(f"line {no}: {exc}") from None
    for res in videos.values():
        for obj_id, dets in res.detections.items():
            dets.sort(key=lambda d: d[0])
            for a, b in zip(dets, dets[1:]):
                if a[0] == b[0]:
                    raise SchemaError(f"object {obj_id} has two detections at frame {a[0]} (video {res.video_id})")
    return list(videos.values())


def fill_gaps(detections: Sequence[tuple[int, BBox]], frame_count: int) -> list[BBox]:
    """Carry the latest detection forward; frames before the first one get a zero box."""
    out = []
    current = ZERO_BOX
    i = 0
    last = 0
    for frame_id, _ in detections:
        if not 1 <= frame_id <= frame_count:
            raise ValueError(f"frame {frame_id} outside 1..{frame_count}")
        if frame_id <= last:
            raise ValueError("detections must be sorted by strictly increasing frame id")
        last = frame_id
    for f in range(1, frame_count + 1):
        while i < len(detections) and detections[i][0] == f:
            current = detections[i][1]
            i += 1
        out.append(current)
    return out


def trajectories(result: VtsResult) -> dict[str, list[BBox]]:
    full = {}
    for obj_id, dets in result.detections.items():
        if not dets:
            raise EmptyTrajectory(f"empty trajectory for object {obj_id} in video {result.video_id}")
        full[obj_id] = fill_gaps(dets, result.frame_count)
    return full


def emit_predictions(result: VtsResult, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    full = trajectories(result)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for obj_id in sorted(full):
        path = out_dir / f"{obj_id}.txt"
        path.write_text("".join(format_box(b) + "\n" for b in full[obj_id]), encoding="utf-8")
        written[obj_id] = path
    return written


def convert(results: Sequence[VtsResult], out_root) -> dict[str, dict[str, Path]]:
    return {r.video_id: emit_predictions(r, Path(out_root) / r.video_id) for r in results}


def load_predictions(video_dir) -> dict[str, list[BBox]]:
    video_dir = Path(video_dir)
    return {p.stem: [parse_box(line) for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]
            for p in sorted(video_dir.glob("*.txt"))}


def id_agnostic_match(frame_predictions: Sequence[BBox], gt: BBox) -> tuple[BBox, float]:
    """Best-IoU prediction for one frame, ignoring identities; first wins ties."""
    if gt.area <= 0:
        raise ValueError("ground truth must have positive area")
    best, best_iou = ZERO_BOX, 0.0
    found = False
    for p in frame_predictions:
        v = iou(p, gt)
        if not found or v > best_iou:
            best, best_iou, found = p, v, True
    return best, best_iou


@dataclass
class Alignment:
    object_id: str | None
    mean_iou: float
    boxes: list[BBox]
    pool: list[list[BBox]]


def align_to_gt(predictions: dict[str, list[BBox]], frame_ids: Sequence[int], gt: Sequence[BBox]) -> Alignment:
    """Pick the prediction file with the highest mean IoU over the tracklet's frames.

    ``frame_ids`` are 1-based positions in the full-video prediction files.
    With no predictions the tracklet is paired with zero boxes.
    """
    scored = [i for i, g in enumerate(gt) if g.w > 0 and g.h > 0]
    best_id, best_score = None, -1.0
    for obj_id, boxes in predictions.items():
        if any(f > len(boxes) for f in frame_ids):
            raise ValueError(f"prediction {obj_id} has {len(boxes)} frames, tracklet needs frame {max(frame_ids)}")
        score = sum(iou(boxes[frame_ids[i] - 1], gt[i]) for i in scored) / len(scored) if scored else 0.0
        if score > best_score:
            best_id, best_score = obj_id, score
    pool = [[boxes[f - 1] for boxes in predictions.values()] for f in frame_ids]
    if best_id is None:
        return Alignment(None, 0.0, [ZERO_BOX] * len(gt), pool)
    chosen = predictions[best_id]
    return Alignment(best_id, best_score, [chosen[f - 1] for f in frame_ids], pool)

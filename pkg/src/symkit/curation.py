"""Turn video-text-spotting annotations into single-object tracking samples.

Annotations are grouped per (video, instance), split wherever the instance is
missing for one or more frames, short pieces are dropped, and each surviving
tracklet becomes a sample directory with a ``groundtruth.txt``.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .boxes import BBox, format_box, parse_box
from .records import Reject, SchemaError, Source, decode, iter_lines, require_frame, require_id, require_points

DEFAULT_MIN_LENGTH = 5
LINK_MODES = ("relative-manifest", "copy")


@dataclass(frozen=True)
class VtsAnnotation:
    video_id: str
    frame_id: int
    instance_id: str
    polygon: tuple[tuple[float, float], ...]
    frame_path: Optional[str] = None


@dataclass
class ParseResult:
    annotations: list[VtsAnnotation]
    rejects: list[Reject]


class DuplicateAnnotation(SchemaError):
    pass


class SampleCollision(FileExistsError):
    pass


def parse_annotations(source: Source) -> ParseResult:
    anns, rejects = [], []
    for no, raw in iter_lines(source):
        try:
            obj = decode(no, raw)
            frame_path = obj.get("frame_path")
            if frame_path is not None and not isinstance(frame_path, str):
                raise SchemaError("frame_path must be a string")
            anns.append(VtsAnnotation(
                require_id(obj, "video_id"),
                require_frame(obj),
                require_id(obj, "instance_id"),
                require_points(obj),
                frame_path,
            ))
        except SchemaError as exc:
            rejects.append(Reject(no, str(exc)))
    return ParseResult(anns, rejects)


def group_and_sort(anns: Sequence[VtsAnnotation]) -> dict[tuple[str, str], list[VtsAnnotation]]:
    """Group by ``(video_id, instance_id)`` in first-seen order; sort each group by frame."""
    groups: dict[tuple[str, str], list[VtsAnnotation]] = {}
    for a in anns:
        groups.setdefault((a.video_id, a.instance_id), []).append(a)
    for (video, inst), items in groups.items():
        items.sort(key=lambda a: a.frame_id)
        for prev, cur in zip(items, items[1:]):
            if prev.frame_id == cur.frame_id:
                raise DuplicateAnnotation(
                    f"duplicate annotation for instance {inst} at frame {cur.frame_id} (video {video})")
    return groups


def split_continuity(sorted_frames: Sequence[tuple]) -> list[list[tuple]]:
    """Cut a frame-sorted ``(frame_id, ...)`` sequence wherever frame ids jump."""
    segments: list[list[tuple]] = []
    for item in sorted_frames:
        if segments and item[0] == segments[-1][-1][0] + 1:
            segments[-1].append(item)
        else:
            if segments and item[0] <= segments[-1][-1][0]:
                raise ValueError(f"frame ids must be strictly increasing, got {item[0]} after {segments[-1][-1][0]}")
            segments.append([item])
    return segments


def filter_min_length(segments: Sequence[list], min_length: int = DEFAULT_MIN_LENGTH) -> tuple[list[list], int]:
    if min_length < 1:
        raise ValueError("min_length must be >= 1")
    kept = [s for s in segments if len(s) >= min_length]
    return kept, len(segments) - len(kept)


def polygon_to_bbox(polygon: Sequence[tuple[float, float]]) -> BBox:
    if len(polygon) < 3:
        raise SchemaError("degenerate polygon")
    xs = [p[0] for p in polygon]
    ys = [p[1] for p in polygon]
    return BBox(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))


@dataclass
class Tracklet:
    source_video: str
    instance_id: str
    split_index: int
    frames: list[tuple[int, BBox, str]]  # (original frame id, box, frame path)

    @property
    def name(self) -> str:
        return f"{self.source_video}-{self.instance_id}-{self.split_index}"


@dataclass
class CurationConfig:
    output_root: Path = Path("sot")
    min_length: int = DEFAULT_MIN_LENGTH
    link_mode: str = "relative-manifest"
    frames_root: Optional[Path] = None  # image source for copy mode
    frame_template: str = "{video}/{frame:06d}.jpg"
    force: bool = False

    def __post_init__(self):
        self.output_root = Path(self.output_root)
        if self.min_length < 1:
            raise ValueError("min_length must be >= 1")
        if self.link_mode not in LINK_MODES:
            raise ValueError(f"link_mode must be one of {LINK_MODES}")


@dataclass(frozen=True)
class SampleRecord:
    name: str
    path: Path
    frames: int


def emit_sot_sample(tracklet: Tracklet, cfg: CurationConfig) -> SampleRecord:
    dest = cfg.output_root / tracklet.name
    if dest.exists():
        if not cfg.force:
            raise SampleCollision(f"{dest} already exists (use --force to overwrite)")
        shutil.rmtree(dest)
    dest.mkdir(parents=True)
    gt_lines, map_lines = [], []
    for new_index, (frame_id, box, path) in enumerate(tracklet.frames, 1):
        gt_lines.append(format_box(box) + "\n")
        map_lines.append(f"{new_index}\t{frame_id}\t{path}\n")
        if cfg.link_mode == "copy":
            if cfg.frames_root is None:
                raise ValueError("copy mode needs frames_root")
            src = Path(cfg.frames_root) / path
            img_dir = dest / "img"
            img_dir.mkdir(exist_ok=True)
            shutil.copyfile(src, img_dir / f"{new_index:08d}{src.suffix}")
    (dest / "groundtruth.txt").write_text("".join(gt_lines), encoding="utf-8")
    (dest / "frames.map").write_text("".join(map_lines), encoding="utf-8")
    (dest / "meta.txt").write_text(
        f"video_id={tracklet.source_video}\ninstance_id={tracklet.instance_id}\n"
        f"split_index={tracklet.split_index}\n", encoding="utf-8")
    return SampleRecord(tracklet.name, dest, len(tracklet.frames))


@dataclass
class CurationSummary:
    videos: int = 0
    instances: int = 0
    segments: int = 0
    tracklets: int = 0
    discarded: int = 0
    rejects: list[Reject] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    samples: list[SampleRecord] = field(default_factory=list)

    def lines(self) -> list[str]:
        return [f"videos={self.videos}", f"instances={self.instances}", f"segments={self.segments}",
                f"tracklets={self.tracklets}", f"discarded={self.discarded}",
                f"rejects={len(self.rejects)}", f"warnings={len(self.warnings)}"]


def build_tracklets(anns: Sequence[VtsAnnotation], cfg: CurationConfig, summary: CurationSummary) -> list[Tracklet]:
    groups = group_and_sort(anns)
    summary.videos = len({v for v, _ in groups})
    summary.instances = len(groups)
    out = []
    for (video, inst), items in groups.items():
        segments = split_continuity([(a.frame_id, a) for a in items])
        summary.segments += len(segments)
        for split_index, seg in enumerate(segments):
            if len(seg) < cfg.min_length:
                summary.discarded += 1
                continue
            frames = []
            for frame_id, a in seg:
                box = polygon_to_bbox(a.polygon)
                if box.w == 0 or box.h == 0:
                    summary.warnings.append(
                        f"zero-area box for instance {inst} at frame {frame_id} (video {video})")
                path = a.frame_path or cfg.frame_template.format(video=video, frame=frame_id)
                frames.append((frame_id, box, path))
            out.append(Tracklet(video, inst, split_index, frames))
    summary.tracklets = len(out)
    return out


def curate(source: Source, cfg: CurationConfig) -> CurationSummary:
    parsed = parse_annotations(source)
    summary = CurationSummary(rejects=parsed.rejects)
    for t in build_tracklets(parsed.annotations, cfg, summary):
        summary.samples.append(emit_sot_sample(t, cfg))
    return summary


@dataclass
class GtSample:
    name: str
    video_id: str
    frame_ids: list[int]
    boxes: list[BBox]


def load_sample(directory) -> GtSample:
    directory = Path(directory)
    boxes = [parse_box(line) for line in (directory / "groundtruth.txt").read_text(encoding="utf-8").splitlines()
             if line.strip()]
    meta = {}
    meta_path = directory / "meta.txt"
    if meta_path.exists():
        for line in meta_path.read_text(encoding="utf-8").splitlines():
            k, _, v = line.partition("=")
            meta[k] = v
    map_path = directory / "frames.map"
    if map_path.exists():
        frame_ids = [int(line.split("\t")[1]) for line in map_path.read_text(encoding="utf-8").splitlines()
                     if line.strip()]
    else:
        frame_ids = list(range(1, len(boxes) + 1))
    if len(frame_ids) != len(boxes):
        raise SchemaError(f"{directory}: frames.map has {len(frame_ids)} entries for {len(boxes)} boxes")
    return GtSample(directory.name, meta.get("video_id", directory.name), frame_ids, boxes)


def load_samples(root) -> list[GtSample]:
    root = Path(root)
    return [load_sample(p) for p in sorted(root.iterdir()) if (p / "groundtruth.txt").is_file()]

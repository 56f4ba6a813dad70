import json
import random
from pathlib import Path

import pytest

from symkit.boxes import BBox, format_box, format_number, parse_box
from symkit.curation import (
    CurationConfig,
    DuplicateAnnotation,
    SampleCollision,
    curate,
    filter_min_length,
    group_and_sort,
    load_sample,
    parse_annotations,
    polygon_to_bbox,
    split_continuity,
)
from symkit.records import SchemaError

HERE = Path(__file__).parent
FIXTURE = HERE / "fixtures" / "gap_instance.jsonl"
GOLDEN = HERE / "golden" / "curate"


def line(video="v", frame=1, inst="A", poly=((0, 0), (4, 0), (4, 2), (0, 2)), **extra):
    rec = {"video_id": video, "frame_id": frame, "instance_id": inst, "polygon": [list(p) for p in poly]}
    rec.update(extra)
    return json.dumps(rec)


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_split_continuity_traces():
    def ids(segs):
        return [[f for f, *_ in s] for s in segs]

    assert ids(split_continuity([(f,) for f in (1, 2, 3, 5, 6)])) == [[1, 2, 3], [5, 6]]
    assert ids(split_continuity([(f,) for f in (4, 9, 10)])) == [[4], [9, 10]]
    assert split_continuity([]) == []
    with pytest.raises(ValueError):
        split_continuity([(3,), (2,)])


def test_filter_min_length_trace():
    segs = [[0] * 3, [0] * 5, [0] * 7]
    kept, dropped = filter_min_length(segs, 5)
    assert [len(s) for s in kept] == [5, 7] and dropped == 1
    kept, dropped = filter_min_length([[0], [0, 0]], 5)
    assert kept == [] and dropped == 2
    with pytest.raises(ValueError):
        filter_min_length(segs, 0)


def test_polygon_to_bbox():
    assert polygon_to_bbox([(3, 1), (7, 2), (5, 9)]) == BBox(3, 1, 4, 8)
    with pytest.raises(SchemaError, match="degenerate polygon"):
        polygon_to_bbox([(0, 0), (1, 1)])


def test_number_format():
    assert format_number(12.0) == "12"
    assert format_number(0.1) == "0.1"
    assert format_number(-3.0) == "-3"
    assert format_box(BBox(1, 2.5, 3, 4.25)) == "1,2.5,3,4.25"
    assert parse_box("1,2.5,3,4.25") == BBox(1, 2.5, 3, 4.25)


def test_parse_collects_rejects():
    src = [
        line(frame=1),
        "not json",
        line(frame=0),
        line(poly=((0, 0), (1, 1))),
        line(inst="../x"),
        json.dumps({"video_id": "v", "frame_id": 2, "instance_id": "A"}),
        line(frame=3, frame_path="v/img3.png"),
    ]
    res = parse_annotations(src)
    assert [a.frame_id for a in res.annotations] == [1, 3]
    assert res.annotations[1].frame_path == "v/img3.png"
    assert [r.line for r in res.rejects] == [2, 3, 4, 5, 6]
    assert res.rejects[2].reason == "degenerate polygon"


def test_duplicate_frame_is_an_error():
    res = parse_annotations([line(frame=7), line(frame=7)])
    with pytest.raises(DuplicateAnnotation, match="instance A at frame 7"):
        group_and_sort(res.annotations)


def test_group_and_sort_orders_frames():
    res = parse_annotations([line(frame=3), line(frame=1, inst="B"), line(frame=2)])
    groups = group_and_sort(res.annotations)
    assert list(groups) == [("v", "A"), ("v", "B")]
    assert [a.frame_id for a in groups[("v", "A")]] == [2, 3]


def test_golden_min_length_default_discards_both(tmp_path):
    summary = curate(FIXTURE, CurationConfig(output_root=tmp_path / "sot"))
    assert (summary.tracklets, summary.discarded, summary.segments) == (0, 2, 2)
    assert not (tmp_path / "sot").exists() or not any((tmp_path / "sot").iterdir())


def test_golden_min_length_two(tmp_path):
    summary = curate(FIXTURE, CurationConfig(output_root=tmp_path / "sot", min_length=2))
    assert (summary.tracklets, summary.discarded) == (2, 0)
    assert [s.frames for s in summary.samples] == [3, 2]
    assert tree(tmp_path / "sot") == tree(GOLDEN)


def test_single_run_of_six_is_one_tracklet(tmp_path):
    src = [line(frame=f) for f in range(1, 7)]
    summary = curate(src, CurationConfig(output_root=tmp_path))
    assert summary.tracklets == 1 and summary.samples[0].frames == 6
    assert summary.lines() == ["videos=1", "instances=1", "segments=1", "tracklets=1", "discarded=0",
                               "rejects=0", "warnings=0"]


def test_collision_and_force(tmp_path):
    cfg = CurationConfig(output_root=tmp_path, min_length=2)
    curate(FIXTURE, cfg)
    with pytest.raises(SampleCollision):
        curate(FIXTURE, cfg)
    (tmp_path / "v1-A-0" / "stale.txt").write_text("x")
    curate(FIXTURE, CurationConfig(output_root=tmp_path, min_length=2, force=True))
    assert tree(tmp_path) == tree(GOLDEN)


def test_zero_area_box_is_kept_with_warning(tmp_path):
    flat = ((0, 5), (10, 5), (4, 5))
    summary = curate([line(frame=f, poly=flat) for f in (1, 2)], CurationConfig(output_root=tmp_path, min_length=1))
    assert summary.tracklets == 1 and len(summary.warnings) == 2
    assert (tmp_path / "v-A-0" / "groundtruth.txt").read_text() == "0,5,10,0\n0,5,10,0\n"


def test_copy_mode_materialises_frames(tmp_path):
    frames = tmp_path / "frames" / "v"
    frames.mkdir(parents=True)
    for f in (1, 2):
        (frames / f"{f:06d}.jpg").write_bytes(bytes([f]))
    cfg = CurationConfig(output_root=tmp_path / "out", min_length=1, link_mode="copy", frames_root=tmp_path / "frames")
    curate([line(frame=1), line(frame=2)], cfg)
    assert (tmp_path / "out" / "v-A-0" / "img" / "00000002.jpg").read_bytes() == b"\x02"


def test_load_sample_round_trip(tmp_path):
    curate(FIXTURE, CurationConfig(output_root=tmp_path, min_length=2))
    s = load_sample(tmp_path / "v1-A-1")
    assert (s.name, s.video_id, s.frame_ids) == ("v1-A-1", "v1", [5, 6])
    assert s.boxes == [BBox(18, 22, 40, 12), BBox(20, 22, 40.75, 12)]


def test_splitting_is_lossless(tmp_path):
    rng = random.Random(12)
    for trial in range(20):
        frames = sorted(rng.sample(range(1, 60), rng.randint(1, 25)))
        out = tmp_path / str(trial)
        curate([line(frame=f) for f in frames], CurationConfig(output_root=out, min_length=1))
        recovered = sorted(f for d in out.iterdir() for f in load_sample(d).frame_ids)
        assert recovered == frames

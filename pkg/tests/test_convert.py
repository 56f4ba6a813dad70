import json
import random
from pathlib import Path

import pytest

from symkit.boxes import ZERO_BOX, BBox
from symkit.convert import (
    EmptyTrajectory,
    VtsResult,
    align_to_gt,
    convert,
    emit_predictions,
    fill_gaps,
    id_agnostic_match,
    load_predictions,
    parse_vts,
)
from symkit.records import SchemaError

HERE = Path(__file__).parent
FIXTURE = HERE / "fixtures" / "vts_gaps.jsonl"
GOLDEN = HERE / "golden" / "convert"

A, B = BBox(1, 1, 2, 2), BBox(5, 5, 3, 3)


def test_fill_gaps_traces():
    assert fill_gaps([(1, A), (4, B)], 5) == [A, A, A, B, B]
    assert fill_gaps([(3, A)], 4) == [ZERO_BOX, ZERO_BOX, A, A]
    full = [(f, BBox(f, 0, 1, 1)) for f in range(1, 6)]
    assert fill_gaps(full, 5) == [b for _, b in full]
    with pytest.raises(ValueError):
        fill_gaps([(6, A)], 5)
    with pytest.raises(ValueError):
        fill_gaps([(3, A), (2, B)], 5)


def test_fill_gaps_properties():
    rng = random.Random(1)
    for _ in range(100):
        n = rng.randint(1, 30)
        frames = sorted(rng.sample(range(1, n + 1), rng.randint(1, n)))
        dets = [(f, BBox(f, f, 1, 1)) for f in frames]
        out = fill_gaps(dets, n)
        assert len(out) == n
        for f, box in enumerate(out, 1):
            earlier = [b for g, b in dets if g <= f]
            assert box == (earlier[-1] if earlier else ZERO_BOX)
        # idempotent when the filled output is fed back as detections
        assert fill_gaps(list(enumerate(out, 1)), n) == out


def test_golden_prediction_files(tmp_path):
    (res,) = parse_vts(FIXTURE)
    written = emit_predictions(res, tmp_path)
    assert sorted(written) == ["7", "9"]
    for name in ("7", "9"):
        assert (tmp_path / f"{name}.txt").read_bytes() == (GOLDEN / f"{name}.txt").read_bytes()
    again = tmp_path / "again"
    emit_predictions(res, again)
    assert (again / "7.txt").read_bytes() == (tmp_path / "7.txt").read_bytes()


def test_three_objects_three_files(tmp_path):
    res = VtsResult("v", 2, {o: [(1, A)] for o in ("a", "b", "c")})
    assert len(convert([res], tmp_path)["v"]) == 3
    assert sorted(load_predictions(tmp_path / "v")) == ["a", "b", "c"]


def test_empty_trajectory_rejected(tmp_path):
    with pytest.raises(EmptyTrajectory, match="empty trajectory"):
        emit_predictions(VtsResult("v", 3, {"x": []}), tmp_path)


def test_parse_vts_errors():
    head = json.dumps({"video_id": "v", "frame_count": 3})
    det = lambda **kw: json.dumps({"video_id": "v", "frame_id": 1, "object_id": "o", "bbox": [0, 0, 1, 1], **kw})
    with pytest.raises(SchemaError, match="line 1"):
        parse_vts([det()])
    with pytest.raises(SchemaError, match="line 2: frame 4"):
        parse_vts([head, det(frame_id=4)])
    with pytest.raises(SchemaError, match="two detections"):
        parse_vts([head, det(), det()])
    with pytest.raises(SchemaError, match="bbox"):
        parse_vts([head, det(bbox=[0, 0, 1])])


def test_id_agnostic_match_cases():
    gt = BBox(0, 0, 4, 4)
    assert id_agnostic_match([BBox(0, 0, 4, 4), BBox(10, 10, 2, 2)], gt) == (gt, 1.0)
    assert id_agnostic_match([], gt) == (ZERO_BOX, 0.0)
    # IoU 1/7 versus 1/3
    low = BBox(2, 0, 4, 4)  # overlap 8, union 24 -> 1/3
    lower = BBox(3, 0, 4, 4)  # overlap 4, union 28 -> 1/7
    box, v = id_agnostic_match([lower, low], gt)
    assert box == low and v == pytest.approx(1 / 3)
    twin = BBox(2, 0, 4, 4)
    assert id_agnostic_match([low, twin], gt)[0] is low
    with pytest.raises(ValueError):
        id_agnostic_match([gt], BBox(0, 0, 0, 3))


def test_align_to_gt_picks_best_mean_iou():
    gt = [BBox(0, 0, 10, 10)] * 3
    good = [BBox(1, 1, 10, 10)] * 6  # IoU 81/119
    poor = [BBox(8, 8, 10, 10)] * 6
    al = align_to_gt({"p": poor, "g": good}, [2, 3, 4], gt)
    assert al.object_id == "g"
    assert al.boxes == good[1:4]
    assert al.pool == [[poor[0], good[0]]] * 3
    none = align_to_gt({}, [1, 2, 3], gt)
    assert none.object_id is None and none.boxes == [ZERO_BOX] * 3
    with pytest.raises(ValueError):
        align_to_gt({"p": poor}, [7], gt[:1])

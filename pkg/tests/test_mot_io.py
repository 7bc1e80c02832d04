import locale

import numpy as np
import pytest

from fasttracker.geometry import Box
from fasttracker.mot_io import (Detection, ParseError, TrackRecord, apply_nms, format_result_row,
                                parse_detections, parse_ground_truth, parse_results, write_detections,
                                write_results)


def _write(tmp_path, text, name="f.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_detection_row_fields(tmp_path):
    dets = parse_detections(_write(tmp_path, "1,-1,10,20,30,40,0.9,1,-1,-1\n"))
    (d,) = dets[1]
    assert d == Detection(1, Box(10, 20, 30, 40), 0.9, 1)


def test_zero_width_rejected(tmp_path):
    p = _write(tmp_path, "1,-1,10,20,0,40,0.9\n")
    with pytest.raises(ParseError) as err:
        parse_detections(p)
    assert err.value.line == 1
    assert parse_detections(p, strict=False) == {}


def test_frames_grouped_in_order(tmp_path):
    text = "2,-1,0,0,5,5,0.9\n1,-1,1,1,5,5,0.8\n2,-1,9,9,5,5,0.7\n1,-1,3,3,5,5,0.6\n"
    dets = parse_detections(_write(tmp_path, text))
    assert list(dets) == [1, 2]
    assert [d.box.left for d in dets[1]] == [1, 3]
    assert [d.box.left for d in dets[2]] == [0, 9]


def test_missing_class_defaults_and_short_rows(tmp_path):
    assert parse_detections(_write(tmp_path, "3,-1,0,0,5,5,0.5\n"))[3][0].class_id == 1
    with pytest.raises(ParseError):
        parse_detections(_write(tmp_path, "1,-1,0,0,5\n"))
    with pytest.raises(ParseError):
        parse_detections(_write(tmp_path, "x,-1,0,0,5,5,0.5\n"))


def _reference_gt(path):
    # straightforward reading of the convention: drop flag 0, keep everything else
    out = []
    for line in path.read_text().splitlines():
        c = line.split(",")
        if float(c[6]) == 0:
            continue
        out.append((int(c[0]), int(c[1]), float(c[8])))
    return sorted(out)


def test_ground_truth_against_reference(tmp_path):
    rows = []
    rng = np.random.default_rng(0)
    for k in range(10):
        flag = 0 if k in (2, 7) else 1
        vis = 0.3 if k == 4 else round(float(rng.uniform(0.5, 1)), 2)
        rows.append(f"{1 + k // 3},{k % 3 + 1},{k},{k},10,20,{flag},1,{vis}")
    p = _write(tmp_path, "\n".join(rows) + "\n")
    gt = parse_ground_truth(p)
    got = sorted((g.frame, g.id, g.visibility) for rows in gt.values() for g in rows)
    assert got == _reference_gt(p)
    assert any(v == 0.3 for *_, v in got)
    assert len(gt[1]) == 2  # row k=2 is flagged 0


def test_result_row_format():
    r = TrackRecord(1, 3, Box(5, 6, 7, 8), 0.9)
    assert format_result_row(r) == "1,3,5.00,6.00,7.00,8.00,0.90,-1,-1,-1"


def test_empty_results_file(tmp_path):
    write_results([], tmp_path / "r.txt")
    assert (tmp_path / "r.txt").read_bytes() == b""


def test_results_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    recs = [TrackRecord(int(f), int(i), Box(*rng.uniform(-100, 100, 2), *rng.uniform(1, 50, 2)),
                        float(rng.uniform(0, 1)))
            for f, i in {(int(a), int(b)) for a, b in rng.integers(1, 20, (200, 2))}]
    write_results(recs, tmp_path / "r.txt")
    back = {(r.frame, r.id): r for r in parse_results(tmp_path / "r.txt")}
    assert len(back) == len(recs)
    for r in recs:
        b = back[(r.frame, r.id)]
        assert b.box.as_tuple() == pytest.approx(r.box.as_tuple(), abs=0.005)
        assert b.confidence == pytest.approx(r.confidence, abs=0.005)


def test_results_byte_deterministic(tmp_path):
    recs = [TrackRecord(2, 1, Box(0, 0, 1, 1), 0.5), TrackRecord(1, 2, Box(-0.001, 0, 1, 1), 0.5)]
    write_results(recs, tmp_path / "a.txt")
    write_results(list(reversed(recs)), tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert (tmp_path / "a.txt").read_text().startswith("1,2,0.00,")


def test_duplicate_result_ids_rejected(tmp_path):
    p = _write(tmp_path, "1,1,0,0,5,5,1,-1,-1,-1\n1,1,3,3,5,5,1,-1,-1,-1\n")
    with pytest.raises(ParseError):
        parse_results(p)


def test_parsing_ignores_locale(tmp_path):
    try:
        locale.setlocale(locale.LC_NUMERIC, "de_DE.UTF-8")
    except locale.Error:
        pytest.skip("locale not installed")
    try:
        assert parse_detections(_write(tmp_path, "1,-1,1.5,2,3,4,0.5\n"))[1][0].box.left == 1.5
    finally:
        locale.setlocale(locale.LC_NUMERIC, "C")


def test_detection_writer_round_trip(tmp_path):
    dets = [Detection(1, Box(1, 2, 3, 4), 0.75, 2), Detection(2, Box(5, 6, 7, 8), 0.3, 1)]
    write_detections(dets, tmp_path / "d.txt")
    back = parse_detections(tmp_path / "d.txt")
    assert [d for rows in back.values() for d in rows] == dets


def test_nms_is_class_aware():
    a = Detection(1, Box(0, 0, 10, 10), 0.9, 1)
    b = Detection(1, Box(0.5, 0, 10, 10), 0.8, 1)
    c = Detection(1, Box(0.5, 0, 10, 10), 0.8, 2)
    assert apply_nms([a, b, c], 0.75) == [a, c]

import json
import math
from collections import defaultdict

import pytest

from fasttracker.environment import load_map, region_lookup, wrap_angle
from fasttracker.metrics import evaluate
from fasttracker.mot_io import TrackRecord, parse_detections, parse_ground_truth
from fasttracker.synth import (SCENARIOS, GenerationError, NoiseModel, OcclusionWindow, ScenarioSpec,
                               default_spec, generate, generate_files, inject_duplicates, scenario_suite)

from .oracles import raster_coverage

NO_NOISE = NoiseModel(center_std=0.0, extent_std=0.0)


def test_crossing_window_suppresses_detections():
    scn = generate(default_spec("crossing_occlusion", 3))
    (w,) = scn.windows
    assert w.end - w.start + 1 == 10
    inside = [d for d, src in zip(scn.detections, scn.sources)
              if src == w.occluded and w.start <= d.frame <= w.end]
    assert inside == []
    for oid in (w.occluded, w.occluder):
        assert sum(g.id == oid for g in scn.ground_truth) == scn.spec.n_frames


def test_dropout_decays_confidence_into_low_band():
    scn = generate(default_spec("dropout", 3))
    (w,) = scn.windows
    confs = [d.confidence for d, src in zip(scn.detections, scn.sources)
             if src == w.occluded and w.start <= d.frame <= w.end]
    assert len(confs) == 10
    assert all(0.2 <= c < 0.65 for c in confs)


@pytest.mark.parametrize("name", SCENARIOS)
def test_noise_free_detections_equal_ground_truth(name):
    scn = generate(default_spec(name, 1, noise=NO_NOISE))
    gt = {(g.frame, g.id): g.box for g in scn.ground_truth}
    assert scn.detections
    for d, src in zip(scn.detections, scn.sources):
        assert d.box == gt[(d.frame, src)]


@pytest.mark.parametrize("name", SCENARIOS)
def test_same_seed_same_bytes(tmp_path, name):
    a = generate_files(default_spec(name, 11), tmp_path / "a")
    b = generate_files(default_spec(name, 11), tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()
    c = generate_files(default_spec(name, 12), tmp_path / "c")
    assert a["det"].read_bytes() != c["det"].read_bytes()


def test_written_files_parse(tmp_path):
    paths = generate_files(default_spec("intersection_flow", 2), tmp_path)
    dets = parse_detections(paths["det"])
    gt = parse_ground_truth(paths["gt"])
    assert dets and gt
    assert load_map(paths["map"]).regions
    spec = ScenarioSpec.from_dict(json.loads(paths["spec"].read_text()))
    assert spec.seed == 2 and spec.name == "intersection_flow"


def test_suite_covers_every_scenario():
    assert sorted(s.name for s in scenario_suite(0, 4)) == sorted(SCENARIOS)


def test_suite_is_stable():
    assert scenario_suite(100, 20) == scenario_suite(100, 20)
    with pytest.raises(ValueError):
        scenario_suite(0, 0)


def test_densest_suite_entry_reaches_forty_per_frame():
    specs = scenario_suite(0, 8)
    best = 0.0
    for spec in specs:
        scn = generate(spec)
        frames = defaultdict(int)
        for g in scn.ground_truth:
            frames[g.frame] += 1
        best = max(best, sum(frames.values()) / spec.n_frames)
    assert best >= 40


@pytest.mark.parametrize("name", ["crossing_occlusion", "dropout"])
def test_perfect_ids_lose_exactly_the_suppressed_rows(name):
    scn = generate(default_spec(name, 5, n_objects=6))
    res = [TrackRecord(d.frame, src, d.box, d.confidence) for d, src in zip(scn.detections, scn.sources)]
    suppressed = len(scn.ground_truth) - len(scn.detections)
    rep = evaluate(scn.ground_truth, res)
    assert (rep.fp, rep.fn_, rep.idsw) == (0, suppressed, 0)
    assert rep.mota == pytest.approx(1 - suppressed / len(scn.ground_truth))
    assert suppressed == (30 if name == "crossing_occlusion" else 0)


@pytest.mark.parametrize("name", ["crossing_occlusion", "dropout"])
def test_window_start_coverage(name):
    scn = generate(default_spec(name, 8, n_objects=8))
    boxes = {(g.frame, g.id): g.box.as_tuple() for g in scn.ground_truth}
    assert len(scn.windows) == 4
    for w in scn.windows:
        assert raster_coverage(boxes[(w.start, w.occluded)], boxes[(w.start, w.occluder)]) >= 0.7


def _cone_violations(scn):
    by_id = defaultdict(list)
    for g in scn.ground_truth:
        by_id[g.id].append(g)
    bad = checked = 0
    for rows in by_id.values():
        for a, b in zip(rows, rows[1:]):
            (x0, y0), (x1, y1) = a.box.center(), b.box.center()
            if b.frame != a.frame + 1 or math.hypot(x1 - x0, y1 - y0) < 1e-9:
                continue
            r = region_lookup(scn.env_map, (x0, y0), a.class_id)
            if r is None:
                continue
            mu, theta = scn.env_map.cone(r)
            phi = math.atan2(y1 - y0, x1 - x0)
            off = abs(wrap_angle(phi - mu))
            if r.bidirectional:
                off = min(off, abs(wrap_angle(phi - mu - math.pi)))
            checked += 1
            bad += off > theta / 2 + 1e-9
    return bad, checked


@pytest.mark.parametrize("name", SCENARIOS)
def test_ground_truth_respects_cones(name):
    bad, checked = _cone_violations(generate(default_spec(name, 4)))
    assert checked > 100 and bad == 0


def test_infeasible_window_raises():
    # a one-frame window would need the occluder to sweep far past the image edge
    spec = ScenarioSpec("crossing_occlusion", 2, 80, occlusion_windows=(OcclusionWindow(2, 1, 40, 40),))
    with pytest.raises(GenerationError):
        generate(spec)
    reused = ScenarioSpec("crossing_occlusion", 3, 80,
                          occlusion_windows=((2, 1, 20, 29), (3, 1, 40, 49)))
    with pytest.raises(GenerationError):
        generate(reused)
    with pytest.raises(GenerationError):
        generate(default_spec("crossing_occlusion", 0, n_frames=30))


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec("crossing_occlusion", 2, 80, occlusion_windows=((1, 1, 5, 10),))
    with pytest.raises(ValueError):
        ScenarioSpec("crossing_occlusion", 2, 80, occlusion_windows=((2, 1, 75, 90),))
    with pytest.raises(ValueError):
        ScenarioSpec("freeway", 2, 80)


def test_spec_round_trip():
    spec = default_spec("platoon", 9, noise=NoiseModel(center_std=2.0))
    assert ScenarioSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def test_injected_duplicates_are_near_copies():
    scn = generate(default_spec("platoon", 1))
    dets = [d for d in scn.detections if d.frame <= 20]
    out = inject_duplicates(dets, 0.5, seed=3)
    extra = len(out) - len(dets)
    assert 0.3 * len(dets) < extra < 0.7 * len(dets)
    for a, b in zip(out, out[1:]):
        if b.confidence == round(a.confidence * 0.98, 4) and b.frame == a.frame and b.box != a.box:
            assert b.box.width == a.box.width
    assert inject_duplicates(dets, 0.5, seed=3) == out

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fasttracker.geometry import Box
from fasttracker.motion import NumericalError
from fasttracker.mot_io import TrackRecord
from fasttracker.postproc import gsp_smooth, link_candidates, link_tracklets, smooth_tracks


def _linear_track(frames, tid=1, v=(3.0, 1.0), origin=(100.0, 200.0), size=(30.0, 60.0)):
    return [TrackRecord(int(f), tid, Box.from_center(origin[0] + v[0] * f, origin[1] + v[1] * f, *size), 0.9)
            for f in frames]


def _linear_oracle(f, v=(3.0, 1.0), origin=(100.0, 200.0)):
    return origin[0] + v[0] * f, origin[1] + v[1] * f


def test_five_frame_gap_matches_linear_interpolation():
    frames = [*range(1, 21), *range(26, 46)]
    out = gsp_smooth(_linear_track(frames))
    assert [r.frame for r in out] == list(range(1, 46))
    for r in out:
        ex, ey = _linear_oracle(r.frame)
        cx, cy = r.box.center()
        assert abs(cx - ex) <= 0.5 and abs(cy - ey) <= 0.5
        assert r.box.width == pytest.approx(30, abs=0.5)


def test_long_gap_left_unfilled():
    frames = [*range(1, 21), *range(46, 66)]      # 25 missing frames
    out = gsp_smooth(_linear_track(frames), max_gap=20)
    assert [r.frame for r in out] == frames


def test_gap_exactly_at_cap_is_filled():
    frames = [*range(1, 21), *range(41, 61)]      # 20 missing frames
    assert len(gsp_smooth(_linear_track(frames), max_gap=20)) == 60


def test_near_zero_noise_reproduces_observations():
    rng = np.random.default_rng(0)
    frames = np.arange(1, 13) * 3
    track = [TrackRecord(int(f), 1, Box.from_center(*rng.uniform(0, 500, 2), *rng.uniform(10, 80, 2)), 0.9)
             for f in frames]
    out = {r.frame: r for r in gsp_smooth(track, length_scale=3.0, noise=1e-6)}
    for r in track:
        assert out[r.frame].box.as_tuple() == pytest.approx(r.box.as_tuple(), abs=1e-6)


def test_ill_conditioned_kernel_raises():
    track = _linear_track(range(1, 40))
    track = [TrackRecord(r.frame, 1, Box(r.box.left + (r.frame % 3), r.box.top, 30, 60), 0.9) for r in track]
    with pytest.raises(NumericalError):
        gsp_smooth(track, length_scale=50.0, noise=1e-7)


def test_short_and_bad_inputs():
    one = _linear_track([4])
    assert gsp_smooth(one) == one
    with pytest.raises(ValueError):
        gsp_smooth(_linear_track([1, 2, 2]))
    with pytest.raises(ValueError):
        gsp_smooth(_linear_track([1, 2]), length_scale=0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 200), min_size=2, max_size=40, unique=True), st.integers(0, 10_000))
def test_smoothing_keeps_observed_frames_and_positive_extents(frames, seed):
    rng = np.random.default_rng(seed)
    track = [TrackRecord(f, 1, Box(*rng.uniform(0, 300, 2), *rng.uniform(0.5, 5, 2)), 0.5) for f in frames]
    out = gsp_smooth(track)
    got = [r.frame for r in out]
    assert set(frames) <= set(got)
    assert all(b > a for a, b in zip(got, got[1:]))
    assert all(r.box.width >= 1 and r.box.height >= 1 for r in out)


def test_smooth_tracks_orders_rows():
    recs = _linear_track(range(1, 10), tid=2) + _linear_track(range(5, 12), tid=1)
    out = smooth_tracks(recs)
    assert [(r.frame, r.id) for r in out] == sorted((r.frame, r.id) for r in out)


def _endpoint_pair(gap, end_xy, start_xy, end_frame=100):
    a = [TrackRecord(f, 1, Box.from_center(end_xy[0], end_xy[1], 20, 40), 0.9)
         for f in range(end_frame - 9, end_frame + 1)]
    b = [TrackRecord(f, 2, Box.from_center(start_xy[0], start_xy[1], 20, 40), 0.9)
         for f in range(end_frame + gap, end_frame + gap + 10)]
    return a + b


def test_link_example_is_eligible():
    (c,) = link_candidates(_endpoint_pair(5, (50, 50), (60, 60)))
    assert (c.earlier, c.later, c.gap) == (1, 2, 5)
    assert c.distance == pytest.approx(math.hypot(10, 10))
    assert 0 < c.score <= 1


def test_link_gates():
    assert link_candidates(_endpoint_pair(20, (50, 50), (60, 60))) == []
    assert link_candidates(_endpoint_pair(5, (50, 50), (150, 50))) == []
    assert len(link_candidates(_endpoint_pair(15, (50, 50), (50, 120)))) == 1


def test_link_ignores_other_classes():
    recs = _endpoint_pair(5, (50, 50), (60, 60))
    recs = [TrackRecord(r.frame, r.id, r.box, r.confidence, 1 if r.id == 1 else 3) for r in recs]
    assert link_candidates(recs) == []


def _split_track(gap_frames=8):
    full = _linear_track(range(1, 61))
    cut = range(31, 31 + gap_frames)
    return [TrackRecord(r.frame, 1 if r.frame < 31 else 2, r.box, r.confidence)
            for r in full if r.frame not in cut]


@pytest.mark.parametrize("gap_frames", [1, 8, 14])
def test_split_track_restored(gap_frames):
    recs = _split_track(gap_frames)
    out = link_tracklets(recs)
    assert {r.id for r in out} == {1}
    assert len(out) == len(recs)


def test_linking_is_conflict_free():
    # two candidates compete for the same successor; only the better one wins
    a = _linear_track(range(1, 21), tid=1, v=(2.0, 0.0), origin=(0.0, 100.0))
    b = _linear_track(range(1, 21), tid=2, v=(2.0, 0.0), origin=(0.0, 130.0))
    c = _linear_track(range(25, 40), tid=3, v=(2.0, 0.0), origin=(0.0, 100.0))
    out = link_tracklets(a + b + c)
    pairs = [(r.frame, r.id) for r in out]
    assert len(pairs) == len(set(pairs)) == len(a + b + c)
    assert {r.id for r in out if r.frame >= 25} == {1}
    assert {r.id for r in out if r.frame <= 20} == {1, 2}


def test_link_chain_and_threshold():
    full = _linear_track(range(1, 91))
    recs = [TrackRecord(r.frame, 1 + (r.frame > 30) + (r.frame > 60), r.box, r.confidence)
            for r in full if r.frame not in (31, 32, 61, 62)]
    assert {r.id for r in link_tracklets(recs)} == {1}
    assert {r.id for r in link_tracklets(recs, min_score=0.99)} == {1, 2, 3}

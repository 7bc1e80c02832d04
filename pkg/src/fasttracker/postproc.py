"""Offline refinement of finished tracks: Gaussian-process smoothing with
bounded gap filling, and motion-based linking of fragmented tracklets."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import dpocon

from .geometry import Box
from .mot_io import TrackRecord
from .motion import MIN_EXTENT, NumericalError

GSP_MAX_GAP = 20
GSP_LENGTH_SCALE = 10.0
GSP_NOISE = 2.0

LINK_MAX_GAP = 15
LINK_MAX_DIST = 70.0
LINK_MIN_SCORE = 0.3
_VELOCITY_WINDOW = 5
# below this reciprocal condition number the GP solve loses most of its digits
_MIN_RCOND = 1e-10


def _segments(frames: np.ndarray, max_gap: int) -> list[slice]:
    """Split sorted frame indices wherever more than ``max_gap`` frames are missing."""
    breaks = np.flatnonzero(np.diff(frames) - 1 > max_gap) + 1
    edges = [0, *breaks.tolist(), len(frames)]
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def _gp_fit_predict(t: np.ndarray, y: np.ndarray, t_query: np.ndarray,
                    length_scale: float, noise: float) -> np.ndarray:
    # linear mean, squared-exponential residual model, one column per coordinate
    design = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    signal_var = np.maximum(np.mean(resid ** 2, axis=0), 1.0)

    d = t[:, None] - t[None, :]
    base = np.exp(-0.5 * (d / length_scale) ** 2)
    dq = t_query[:, None] - t[None, :]
    base_q = np.exp(-0.5 * (dq / length_scale) ** 2)
    out = np.column_stack([np.ones_like(t_query), t_query]) @ coef
    for c in range(y.shape[1]):
        K = signal_var[c] * base + noise ** 2 * np.eye(len(t))
        try:
            factor = cho_factor(K, lower=True)
        except np.linalg.LinAlgError:
            raise NumericalError("GP kernel matrix is singular; increase noise or shorten length_scale") from None
        rcond, _ = dpocon(factor[0], np.abs(K).sum(axis=0).max(), uplo="L")
        if not rcond >= _MIN_RCOND:
            raise NumericalError(f"GP kernel matrix is numerically singular (rcond {rcond:.1e}); "
                                 "increase noise or shorten length_scale")
        alpha = cho_solve(factor, resid[:, c])
        out[:, c] += signal_var[c] * base_q @ alpha
    return out


def _floored(r: TrackRecord) -> TrackRecord:
    b = r.box
    if b.width >= MIN_EXTENT and b.height >= MIN_EXTENT:
        return r
    cx, cy = b.center()
    box = Box.from_center(cx, cy, max(b.width, MIN_EXTENT), max(b.height, MIN_EXTENT))
    return TrackRecord(r.frame, r.id, box, r.confidence, r.class_id)


def gsp_smooth(track: Sequence[TrackRecord], max_gap: int = GSP_MAX_GAP,
               length_scale: float = GSP_LENGTH_SCALE, noise: float = GSP_NOISE) -> list[TrackRecord]:
    """Smooth one identity's boxes and fill gaps of at most ``max_gap`` frames.

    Center x/y and width/height are regressed independently over the frame
    index.  Longer gaps split the track into separately smoothed segments and
    stay empty.  Filled frames take the confidence of the observation before
    the gap.
    """
    recs = sorted(track, key=lambda r: r.frame)
    if len(recs) < 2:
        return [_floored(r) for r in recs]
    if length_scale <= 0:
        raise ValueError("length_scale must be positive")
    frames = np.array([r.frame for r in recs], dtype=np.float64)
    if np.any(np.diff(frames) <= 0):
        raise ValueError("track has repeated frames")
    y = np.array([[*r.box.center(), r.box.width, r.box.height] for r in recs])
    out: list[TrackRecord] = []
    for seg in _segments(frames.astype(int), max_gap):
        seg_recs = recs[seg]
        if len(seg_recs) == 1:
            out.append(_floored(seg_recs[0]))
            continue
        t = frames[seg]
        t_query = np.arange(t[0], t[-1] + 1)
        pred = _gp_fit_predict(t, y[seg], t_query, length_scale, noise)
        by_frame = {r.frame: r for r in seg_recs}
        last = seg_recs[0]
        for f, (cx, cy, w, h) in zip(t_query.astype(int), pred):
            src = by_frame.get(int(f))
            if src is not None:
                last = src
            w, h = max(w, MIN_EXTENT), max(h, MIN_EXTENT)
            out.append(TrackRecord(int(f), last.id, Box.from_center(cx, cy, w, h),
                                   last.confidence, last.class_id))
    return out


def smooth_tracks(records: Iterable[TrackRecord], max_gap: int = GSP_MAX_GAP,
                  length_scale: float = GSP_LENGTH_SCALE, noise: float = GSP_NOISE) -> list[TrackRecord]:
    by_id = defaultdict(list)
    for r in records:
        by_id[r.id].append(r)
    out = []
    for tid in sorted(by_id):
        out.extend(gsp_smooth(by_id[tid], max_gap, length_scale, noise))
    out.sort(key=lambda r: (r.frame, r.id))
    return out


@dataclass(frozen=True)
class LinkCandidate:
    earlier: int
    later: int
    gap: int
    distance: float
    score: float


@dataclass
class _Span:
    id: int
    class_id: int
    start: int
    end: int
    start_center: tuple[float, float]
    end_center: tuple[float, float]
    velocity: tuple[float, float]


def _spans(by_id: dict[int, list[TrackRecord]]) -> list[_Span]:
    spans = []
    for tid in sorted(by_id):
        recs = by_id[tid]
        last = recs[-1]
        ref = recs[max(0, len(recs) - 1 - _VELOCITY_WINDOW)]
        ex, ey = last.box.center()
        if ref.frame < last.frame:
            rx, ry = ref.box.center()
            dt = last.frame - ref.frame
            vel = ((ex - rx) / dt, (ey - ry) / dt)
        else:
            vel = (0.0, 0.0)
        spans.append(_Span(tid, last.class_id, recs[0].frame, last.frame,
                           recs[0].box.center(), (ex, ey), vel))
    return spans


def link_candidates(records: Iterable[TrackRecord], max_gap: int = LINK_MAX_GAP,
                    max_dist: float = LINK_MAX_DIST) -> list[LinkCandidate]:
    """All gated (earlier, later) pairs with their motion-consistency score.

    The score multiplies ``exp(-miss / max_dist)``, where ``miss`` is the
    distance between the earlier tracklet's constant-velocity extrapolation
    and the later one's first center, by ``exp(-gap / max_gap)``.
    """
    by_id = defaultdict(list)
    for r in sorted(records, key=lambda r: (r.id, r.frame)):
        by_id[r.id].append(r)
    spans = _spans(by_id)
    out = []
    for a in spans:
        for b in spans:
            if a.id == b.id or a.class_id != b.class_id:
                continue
            gap = b.start - a.end
            if gap < 1 or gap > max_gap:
                continue
            dist = math.hypot(b.start_center[0] - a.end_center[0], b.start_center[1] - a.end_center[1])
            if dist > max_dist:
                continue
            px = a.end_center[0] + a.velocity[0] * gap
            py = a.end_center[1] + a.velocity[1] * gap
            miss = math.hypot(b.start_center[0] - px, b.start_center[1] - py)
            score = math.exp(-miss / max_dist) * math.exp(-gap / max_gap)
            out.append(LinkCandidate(a.id, b.id, gap, dist, score))
    return out


def link_tracklets(records: Sequence[TrackRecord], max_gap: int = LINK_MAX_GAP,
                   max_dist: float = LINK_MAX_DIST, min_score: float = LINK_MIN_SCORE) -> list[TrackRecord]:
    """Relabel later tracklets with the id of the earlier one they continue.

    Candidates are accepted greedily by descending score (ties by earlier
    id, then later id); each tracklet gets at most one predecessor and one
    successor.  Only ids change; no boxes are added or removed.
    """
    cands = [c for c in link_candidates(records, max_gap, max_dist) if c.score > min_score]
    cands.sort(key=lambda c: (-c.score, c.earlier, c.later))
    succ, pred = {}, {}
    for c in cands:
        if c.earlier in succ or c.later in pred:
            continue
        succ[c.earlier] = c.later
        pred[c.later] = c.earlier

    def root(tid):
        while tid in pred:
            tid = pred[tid]
        return tid

    out = [TrackRecord(r.frame, root(r.id), r.box, r.confidence, r.class_id) for r in records]
    out.sort(key=lambda r: (r.frame, r.id))
    return out

"""Online tracker: prediction under scene constraints, confidence-cascaded
association, occlusion handling, deletion and initialization.

Per frame:

1. predict every tracklet (active and occluded), then apply the cone and ROI
   constraints of the region it falls in;
2. match high-confidence detections to all tracklets;
3. match low-confidence detections to the tracklets still unmatched;
4. unmatched tracklets well covered by a matched one become occluded (velocity
   damped, position rewound, box enlarged, once at the transition); tracklets
   already occluded age by one frame;
5. other unmatched tracklets are deleted, as are occluded ones past ``t_occ``;
6. leftover high-confidence detections that overlap no live tracklet by
   ``k_init`` or more start new tracklets.

Occluded tracklets produce no output rows but stay matchable, and revert to
active the moment they are matched again.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .association import associate
from .config import TrackerConfig
from .environment import EnvironmentMap, apply_constraints
from .geometry import Box, coverage_matrix, iou_matrix
from .mot_io import Detection, TrackRecord, apply_nms
from .motion import (dampen_velocity, ema, enlarge_box, initiate,
                     predict, update)

ACTIVE = "active"
OCCLUDED = "occluded"


class SequenceError(ValueError):
    """Frames were fed out of order."""


class Tracklet:
    __slots__ = ("id", "class_id", "state", "status", "occ_age", "history", "extents",
                 "last_confidence", "last_update_frame", "misses", "start_frame")

    def __init__(self, track_id: int, det: Detection, cfg: TrackerConfig):
        self.id = track_id
        self.class_id = det.class_id
        self.state = initiate(det.box, cfg.profile(det.class_id))
        self.status = ACTIVE
        self.occ_age = 0
        self.history = deque(maxlen=cfg.direction_window_n + 1)
        self.history.append((det.frame, self.state.center))
        self.extents = np.array([det.box.width, det.box.height])
        self.last_confidence = det.confidence
        self.last_update_frame = det.frame
        self.start_frame = det.frame
        self.misses = 0

    def __repr__(self):
        return f"Tracklet(id={self.id}, class={self.class_id}, status={self.status}, occ_age={self.occ_age})"

    def ltwh(self) -> np.ndarray:
        return self.state.ltwh()

    def box(self) -> Box:
        return self.state.box()

    def anchor(self, frame: int, window: int):
        """Center recorded at or before ``frame - window``, if any."""
        for f, p in reversed(self.history):
            if f <= frame - window:
                return p
        return None


@dataclass
class FrameOutput:
    frame: int
    records: list[TrackRecord] = field(default_factory=list)


@dataclass
class FrameTrace:
    """Where every detection and every pre-step tracklet ended up in one frame.

    Detection entries are indices into the list passed to ``step``; tracklet
    entries are ids.
    """
    stage1: list[tuple[int, int]] = field(default_factory=list)
    stage2: list[tuple[int, int]] = field(default_factory=list)
    initialized: list[int] = field(default_factory=list)
    suppressed: list[int] = field(default_factory=list)
    discarded: list[int] = field(default_factory=list)
    unused_low: list[int] = field(default_factory=list)
    nms_removed: list[int] = field(default_factory=list)
    matched: list[int] = field(default_factory=list)
    occluded: list[int] = field(default_factory=list)
    deleted: list[int] = field(default_factory=list)
    pending: list[int] = field(default_factory=list)


def _split_indices(dets: Sequence[Detection], cfg: TrackerConfig):
    high, low, dropped = [], [], []
    for i, d in enumerate(dets):
        if d.confidence >= cfg.tau_high:
            high.append(i)
        elif d.confidence >= cfg.tau_low:
            low.append(i)
        else:
            dropped.append(i)
    return high, low, dropped


def classify_detections(dets: Sequence[Detection], cfg: TrackerConfig):
    """(high, low) confidence groups; detections under ``tau_low`` are dropped."""
    high, low, _ = _split_indices(dets, cfg)
    return [dets[i] for i in high], [dets[i] for i in low]


def detect_occlusions(leftovers: Sequence[Tracklet], matched: Sequence[Tracklet],
                      cfg: TrackerConfig) -> list[Tracklet]:
    """Unmatched, not-yet-occluded tracklets covered by a matched one.

    Each returned tracklet is switched to occluded with its velocity damped,
    position rewound and box enlarged.  Class does not matter for occluders.
    """
    candidates = [t for t in leftovers if t.status == ACTIVE]
    if not candidates or not matched or cfg.cp_min > 1.0:
        return []
    cov = coverage_matrix(np.array([t.ltwh() for t in candidates]),
                          np.array([t.ltwh() for t in matched]))
    hit = cov.max(axis=1) >= cfg.cp_min
    out = []
    for t, h in zip(candidates, hit):
        if h:
            prof = cfg.profile(t.class_id)
            t.state = enlarge_box(dampen_velocity(t.state, prof), prof)
            t.status = OCCLUDED
            t.occ_age = 1
            out.append(t)
    return out


def _init_mask(leftover_dets: Sequence[Detection], live_tracks: Sequence[Tracklet],
               cfg: TrackerConfig) -> np.ndarray:
    keep = np.ones(len(leftover_dets), dtype=bool)
    if leftover_dets and live_tracks:
        ious = iou_matrix(np.array([d.box.as_tuple() for d in leftover_dets]),
                          np.array([t.ltwh() for t in live_tracks]))
        keep = ious.max(axis=1) < cfg.k_init
    return keep


def initialize_tracks(leftover_dets: Sequence[Detection], live_tracks: Sequence[Tracklet],
                      cfg: TrackerConfig, next_id: int) -> list[Tracklet]:
    """New tracklets for detections whose best IoU with a live tracklet is below ``k_init``.

    Ids are handed out from ``next_id`` in detection order.
    """
    out = []
    for d, k in zip(leftover_dets, _init_mask(leftover_dets, live_tracks, cfg)):
        if k:
            out.append(Tracklet(next_id, d, cfg))
            next_id += 1
    return out


class FastTracker:
    """Stateful tracker for one sequence.  Feed frames in increasing order."""

    def __init__(self, cfg: Optional[TrackerConfig] = None, env_map: Optional[EnvironmentMap] = None):
        self.cfg = cfg or TrackerConfig()
        self.env_map = env_map if env_map else None
        self.tracks: list[Tracklet] = []
        self.next_id = 1
        self.last_frame: Optional[int] = None
        self.last_trace: Optional[FrameTrace] = None

    def _predict_all(self, frame: int, steps: int) -> None:
        cfg = self.cfg
        for t in self.tracks:
            prof = cfg.profile(t.class_id)
            s = t.state
            for _ in range(steps):
                s = predict(s, prof)
            if self.env_map is not None:
                s = apply_constraints(s, self.env_map, t.class_id,
                                      t.anchor(frame, cfg.direction_window_n))
            t.state = s

    def _apply_match(self, t: Tracklet, d: Detection, frame: int) -> None:
        cfg = self.cfg
        prof = cfg.profile(t.class_id)
        w, h = d.box.width, d.box.height
        if t.status == OCCLUDED:
            # re-measure the extents instead of keeping the enlarged box
            mean = t.state.mean.copy()
            mean[2:4] = (w, h)
            mean[6:8] = 0.0
            t.state = t.state.replace(mean=mean)
            t.extents = np.array([w, h])
            t.status = ACTIVE
            t.occ_age = 0
        t.extents = ema(t.extents, np.array([w, h]), cfg.ema_alpha)
        cx, cy = d.box.center()
        t.state = update(t.state, Box.from_center(cx, cy, t.extents[0], t.extents[1]), prof)
        t.history.append((frame, t.state.center))
        t.last_confidence = d.confidence
        t.last_update_frame = frame
        t.misses = 0

    def step(self, frame: int, dets: Sequence[Detection]) -> FrameOutput:
        cfg = self.cfg
        if self.last_frame is not None and frame <= self.last_frame:
            raise SequenceError(f"frame {frame} does not follow frame {self.last_frame}")
        steps = 1 if self.last_frame is None else frame - self.last_frame
        self.last_frame = frame
        trace = FrameTrace()
        self.last_trace = trace

        dets = list(dets)
        if cfg.nms and len(dets) > 1:
            kept = apply_nms(dets, cfg.nms_iou)
            kept_ids = {id(d) for d in kept}
            trace.nms_removed = [i for i, d in enumerate(dets) if id(d) not in kept_ids]
        removed = set(trace.nms_removed)
        high_idx, low_idx, trace.discarded = _split_indices(dets, cfg)
        high_idx = [i for i in high_idx if i not in removed]
        low_idx = [i for i in low_idx if i not in removed]
        trace.discarded = [i for i in trace.discarded if i not in removed]

        self._predict_all(frame, steps)
        tracks = self.tracks

        # stage 1: high-confidence detections against every tracklet
        r1 = associate(tracks, [dets[i] for i in high_idx], cfg.iou_stage1)
        remain = [tracks[i] for i in r1.unmatched_tracklets]
        # stage 2: low-confidence detections against what is left
        r2 = associate(remain, [dets[i] for i in low_idx], cfg.iou_stage2)

        matched = []
        for ti, di in r1.matches:
            t, d_idx = tracks[ti], high_idx[di]
            self._apply_match(t, dets[d_idx], frame)
            trace.stage1.append((t.id, d_idx))
            matched.append(t)
        for ti, di in r2.matches:
            t, d_idx = remain[ti], low_idx[di]
            self._apply_match(t, dets[d_idx], frame)
            trace.stage2.append((t.id, d_idx))
            matched.append(t)
        trace.unused_low = [low_idx[j] for j in r2.unmatched_detections]
        leftovers = [remain[i] for i in r2.unmatched_tracklets]

        # occlusion handling and deletion
        already_occluded = [t for t in leftovers if t.status == OCCLUDED]
        newly_occluded = detect_occlusions(leftovers, matched, cfg)
        newly_ids = {t.id for t in newly_occluded}
        dead = set()
        for t in already_occluded:
            t.occ_age += 1
        for t in leftovers:
            if t.status == OCCLUDED:
                if t.occ_age > cfg.t_occ:
                    dead.add(t.id)
                else:
                    trace.occluded.append(t.id)
            elif t.id not in newly_ids:
                t.misses += 1
                if t.misses > cfg.grace_frames:
                    dead.add(t.id)
                else:
                    trace.pending.append(t.id)
        trace.deleted = sorted(dead)
        trace.matched = sorted(t.id for t in matched)
        self.tracks = [t for t in tracks if t.id not in dead]

        # initialization from leftover high-confidence detections
        leftover_high = [high_idx[j] for j in r1.unmatched_detections]
        mask = _init_mask([dets[i] for i in leftover_high], self.tracks, cfg)
        for i, k in zip(leftover_high, mask):
            if k:
                self.tracks.append(Tracklet(self.next_id, dets[i], cfg))
                self.next_id += 1
                trace.initialized.append(i)
            else:
                trace.suppressed.append(i)

        records = [TrackRecord(frame, t.id, t.box(), t.last_confidence, t.class_id)
                   for t in self.tracks if t.last_update_frame == frame]
        return FrameOutput(frame, records)


def _contiguous(det_stream: Mapping[int, Sequence[Detection]], n_frames: Optional[int]):
    last = max(det_stream, default=0)
    if n_frames is not None:
        last = max(last, n_frames)
    for f in range(1, last + 1):
        yield f, det_stream.get(f, [])


def run_sequence(det_stream: Mapping[int, Sequence[Detection]], env_map: Optional[EnvironmentMap] = None,
                 cfg: Optional[TrackerConfig] = None, n_frames: Optional[int] = None) -> list[TrackRecord]:
    """Track a whole sequence; frames missing from ``det_stream`` are stepped empty."""
    if any(f < 1 for f in det_stream):
        raise SequenceError("frame indices start at 1")
    tracker = FastTracker(cfg, env_map)
    out: list[TrackRecord] = []
    for frame, dets in _contiguous(det_stream, n_frames):
        out.extend(tracker.step(frame, dets).records)
    return out

"""MOTChallenge-style CSV reading and writing.

Detections:  ``frame,-1,left,top,width,height,conf[,class[,...]]``
Ground truth: ``frame,id,left,top,width,height,flag,class,visibility``
Results:      ``frame,id,left,top,width,height,conf,-1,-1,-1``

Frames are 1-based; coordinates are pixels from the top-left corner.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .config import ConfigError, TrackerConfig, load_config  # noqa: F401  (re-exported)
from .geometry import Box, iou_matrix

log = logging.getLogger(__name__)

DEFAULT_CLASS = 1
UNKNOWN_CLASS = -1


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True, slots=True)
class Detection:
    frame: int
    box: Box
    confidence: float
    class_id: int = DEFAULT_CLASS


@dataclass(frozen=True, slots=True)
class TrackRecord:
    frame: int
    id: int
    box: Box
    confidence: float
    class_id: int = UNKNOWN_CLASS


@dataclass(frozen=True, slots=True)
class GroundTruthBox:
    frame: int
    id: int
    box: Box
    class_id: int = DEFAULT_CLASS
    visibility: float = 1.0


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, [c.strip() for c in line.split(",")]


def _number(path, lineno, text, what):
    try:
        return float(text)
    except ValueError:
        raise ParseError(path, lineno, f"{what} is not a number: {text!r}") from None


def _integer(path, lineno, text, what):
    v = _number(path, lineno, text, what)
    if v != int(v):
        raise ParseError(path, lineno, f"{what} must be an integer, got {text!r}")
    return int(v)


def _box(path, lineno, cols, strict):
    left, top, w, h = (_number(path, lineno, c, n) for c, n in
                       zip(cols[2:6], ("left", "top", "width", "height")))
    if not (w > 0 and h > 0):
        msg = f"non-positive box extent {w}x{h}"
        if strict:
            raise ParseError(path, lineno, msg)
        log.warning("%s:%d: %s; row skipped", path, lineno, msg)
        return None
    return Box(left, top, w, h)


def _frame(path, lineno, cols):
    frame = _integer(path, lineno, cols[0], "frame")
    if frame < 1:
        raise ParseError(path, lineno, f"frame must be >= 1, got {frame}")
    return frame


def _class(path, lineno, cols, index):
    if len(cols) <= index or cols[index] == "":
        return DEFAULT_CLASS
    cid = _integer(path, lineno, cols[index], "class")
    return DEFAULT_CLASS if cid < 0 else cid


def parse_detections(path, strict: bool = True) -> dict[int, list[Detection]]:
    """Detections grouped by frame, frames ascending, file order within a frame.

    With ``strict`` a row with a non-positive extent raises; otherwise it is
    logged and skipped.
    """
    frames: dict[int, list[Detection]] = defaultdict(list)
    for lineno, cols in _rows(path):
        if len(cols) < 7:
            raise ParseError(path, lineno, f"expected at least 7 columns, got {len(cols)}")
        frame = _frame(path, lineno, cols)
        box = _box(path, lineno, cols, strict)
        if box is None:
            continue
        conf = min(max(_number(path, lineno, cols[6], "confidence"), 0.0), 1.0)
        frames[frame].append(Detection(frame, box, conf, _class(path, lineno, cols, 7)))
    return {f: frames[f] for f in sorted(frames)}


def parse_ground_truth(path, strict: bool = True) -> dict[int, list[GroundTruthBox]]:
    """Ground truth grouped by frame; rows flagged 0 are dropped."""
    frames: dict[int, list[GroundTruthBox]] = defaultdict(list)
    for lineno, cols in _rows(path):
        if len(cols) < 6:
            raise ParseError(path, lineno, f"expected at least 6 columns, got {len(cols)}")
        frame = _frame(path, lineno, cols)
        tid = _integer(path, lineno, cols[1], "id")
        if len(cols) > 6 and cols[6] != "" and _number(path, lineno, cols[6], "flag") == 0:
            continue
        box = _box(path, lineno, cols, strict)
        if box is None:
            continue
        vis = _number(path, lineno, cols[8], "visibility") if len(cols) > 8 and cols[8] != "" else 1.0
        frames[frame].append(GroundTruthBox(frame, tid, box, _class(path, lineno, cols, 7), vis))
    return {f: frames[f] for f in sorted(frames)}


def parse_results(path, strict: bool = True) -> list[TrackRecord]:
    out = []
    seen = set()
    for lineno, cols in _rows(path):
        if len(cols) < 7:
            raise ParseError(path, lineno, f"expected at least 7 columns, got {len(cols)}")
        frame = _frame(path, lineno, cols)
        tid = _integer(path, lineno, cols[1], "id")
        if tid < 1:
            raise ParseError(path, lineno, f"track id must be positive, got {tid}")
        if (frame, tid) in seen:
            raise ParseError(path, lineno, f"duplicate id {tid} in frame {frame}")
        seen.add((frame, tid))
        box = _box(path, lineno, cols, strict)
        if box is None:
            continue
        conf = _number(path, lineno, cols[6], "confidence")
        out.append(TrackRecord(frame, tid, box, conf, UNKNOWN_CLASS))
    out.sort(key=lambda r: (r.frame, r.id))
    return out


def group_by_frame(records: Iterable) -> dict[int, list]:
    frames = defaultdict(list)
    for r in records:
        frames[r.frame].append(r)
    return {f: frames[f] for f in sorted(frames)}


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def format_result_row(r: TrackRecord) -> str:
    b = r.box
    return (f"{r.frame},{r.id},{_fmt(b.left)},{_fmt(b.top)},{_fmt(b.width)},{_fmt(b.height)},"
            f"{_fmt(r.confidence)},-1,-1,-1")


def write_results(records: Iterable[TrackRecord], path) -> None:
    rows = sorted(records, key=lambda r: (r.frame, r.id))
    text = "".join(format_result_row(r) + "\n" for r in rows)
    Path(path).write_text(text, encoding="utf-8")


def write_detections(dets: Iterable[Detection], path) -> None:
    lines = []
    for d in dets:
        b = d.box
        lines.append(f"{d.frame},-1,{_fmt(b.left)},{_fmt(b.top)},{_fmt(b.width)},{_fmt(b.height)},"
                     f"{_fmt(d.confidence)},{d.class_id},-1,-1\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def write_ground_truth(rows: Iterable[GroundTruthBox], path) -> None:
    lines = []
    for g in rows:
        b = g.box
        lines.append(f"{g.frame},{g.id},{_fmt(b.left)},{_fmt(b.top)},{_fmt(b.width)},{_fmt(b.height)},"
                     f"1,{g.class_id},{_fmt(g.visibility)}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def apply_nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Class-aware greedy NMS; survivors keep their input order."""
    if len(dets) < 2:
        return list(dets)
    boxes = np.array([d.box.as_tuple() for d in dets])
    ious = iou_matrix(boxes, boxes)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    suppressed = set()
    keep = []
    for i in order:
        if i in suppressed:
            continue
        keep.append(i)
        for j in order:
            if j != i and j not in suppressed and dets[j].class_id == dets[i].class_id \
                    and ious[i, j] > iou_threshold:
                suppressed.add(j)
    return [dets[i] for i in sorted(keep)]


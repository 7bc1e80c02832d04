"""CLEAR-MOT (MOTA, FP, FN, ID switches) and IDF1.

Per frame, ground truth and predictions are matched at IoU >= 0.5.  Pairs
from the previous frame are kept while they still clear the threshold; the
rest are resolved by minimum-cost assignment on ``1 - IoU``.  IDF1 matches
identities globally, each gt id to at most one predicted id.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .association import solve_assignment
from .geometry import iou_matrix
from .mot_io import group_by_frame, parse_ground_truth, parse_results

DEFAULT_IOU = 0.5


@dataclass
class FrameMatch:
    pairs: list[tuple[int, int]] = field(default_factory=list)  # (gt id, pred id)
    false_positives: list[int] = field(default_factory=list)    # pred ids
    misses: list[int] = field(default_factory=list)             # gt ids


@dataclass
class EvalReport:
    mota: float
    fp: int
    fn_: int
    idsw: int
    idf1: float
    gt_total: int
    idtp: int = 0
    idfp: int = 0
    idfn: int = 0
    trace: dict[int, FrameMatch] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        mota = None if math.isnan(self.mota) else round(self.mota, 6)
        return {"mota": mota, "fp": self.fp, "fn": self.fn_, "idsw": self.idsw,
                "idf1": round(self.idf1, 6), "gt_total": self.gt_total}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_text(self) -> str:
        rows = [("MOTA", f"{self.mota:.3f}"), ("IDF1", f"{self.idf1:.3f}"), ("FP", str(self.fp)),
                ("FN", str(self.fn_)), ("IDSW", str(self.idsw)), ("GT", str(self.gt_total))]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k:<{width}} = {v}" for k, v in rows]
        lines.append("HOTA is not computed by this tool.")
        return "\n".join(lines)


def _ids_and_boxes(items):
    ids = [it.id for it in items]
    boxes = np.array([it.box.as_tuple() for it in items], dtype=np.float64).reshape(-1, 4)
    return ids, boxes


def match_frame(gt_items: Sequence, pred_items: Sequence, iou_threshold: float = DEFAULT_IOU,
                previous: Optional[Mapping[int, int]] = None) -> FrameMatch:
    """Correspondence for one frame.

    ``previous`` maps gt id to the pred id it was paired with in the previous
    frame; such pairs survive if their IoU still reaches the threshold.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    g_ids, g_boxes = _ids_and_boxes(gt_items)
    p_ids, p_boxes = _ids_and_boxes(pred_items)
    ious = iou_matrix(g_boxes, p_boxes)
    pairs = []
    used_g, used_p = set(), set()
    if previous:
        p_index = {pid: j for j, pid in enumerate(p_ids)}
        for i, gid in enumerate(g_ids):
            j = p_index.get(previous.get(gid))
            if j is not None and j not in used_p and ious[i, j] >= iou_threshold:
                pairs.append((i, j))
                used_g.add(i)
                used_p.add(j)
    rest_g = [i for i in range(len(g_ids)) if i not in used_g]
    rest_p = [j for j in range(len(p_ids)) if j not in used_p]
    if rest_g and rest_p:
        sub = ious[np.ix_(rest_g, rest_p)]
        cost = np.where(sub >= iou_threshold, 1.0 - sub, 1.0)
        res = solve_assignment(cost, 1.0 - iou_threshold)
        for a, b in res.matches:
            i, j = rest_g[a], rest_p[b]
            if ious[i, j] >= iou_threshold:
                pairs.append((i, j))
                used_g.add(i)
                used_p.add(j)
    pairs.sort()
    return FrameMatch(
        [(g_ids[i], p_ids[j]) for i, j in pairs],
        [p_ids[j] for j in range(len(p_ids)) if j not in used_p],
        [g_ids[i] for i in range(len(g_ids)) if i not in used_g],
    )


def _load(gt, res):
    if isinstance(gt, (str, Path)):
        gt = parse_ground_truth(gt)
    elif not isinstance(gt, Mapping):
        gt = group_by_frame(gt)
    if isinstance(res, (str, Path)):
        res = group_by_frame(parse_results(res))
    elif not isinstance(res, Mapping):
        res = group_by_frame(res)
    return gt, res


def _clear(gt, res, iou_threshold):
    frames = sorted(set(gt) | set(res))
    fp = fn = idsw = 0
    previous: dict[int, int] = {}
    last_match: dict[int, int] = {}
    trace = {}
    for f in frames:
        m = match_frame(gt.get(f, []), res.get(f, []), iou_threshold, previous)
        trace[f] = m
        fp += len(m.false_positives)
        fn += len(m.misses)
        for gid, pid in m.pairs:
            if gid in last_match and last_match[gid] != pid:
                idsw += 1
            last_match[gid] = pid
        previous = dict(m.pairs)
    gt_total = sum(len(v) for v in gt.values())
    mota = 1.0 - (fp + fn + idsw) / gt_total if gt_total else float("nan")
    return mota, fp, fn, idsw, gt_total, trace


def _identity(gt, res, iou_threshold):
    g_list = sorted({g.id for rows in gt.values() for g in rows})
    p_list = sorted({p.id for rows in res.values() for p in rows})
    g_pos = {g: i for i, g in enumerate(g_list)}
    p_pos = {p: j for j, p in enumerate(p_list)}
    overlap = np.zeros((len(g_list), len(p_list)))
    for f in set(gt) & set(res):
        g_ids, g_boxes = _ids_and_boxes(gt[f])
        p_ids, p_boxes = _ids_and_boxes(res[f])
        ious = iou_matrix(g_boxes, p_boxes)
        gi, pj = np.nonzero(ious >= iou_threshold)
        for a, b in zip(gi, pj):
            overlap[g_pos[g_ids[a]], p_pos[p_ids[b]]] += 1
    n_gt = sum(len(v) for v in gt.values())
    n_pred = sum(len(v) for v in res.values())
    idtp = 0
    if overlap.size:
        rows, cols = kernels.linear_assignment(overlap.max() - overlap)
        idtp = int(overlap[rows, cols].sum())
    return idtp, n_pred - idtp, n_gt - idtp


def idf1_score(idtp: int, idfp: int, idfn: int) -> float:
    denom = 2 * idtp + idfp + idfn
    return 2 * idtp / denom if denom else 0.0


def evaluate(gt, res, iou_threshold: float = DEFAULT_IOU) -> EvalReport:
    """Full report from ground truth and results (paths, frame maps or record lists)."""
    gt, res = _load(gt, res)
    mota, fp, fn, idsw, gt_total, trace = _clear(gt, res, iou_threshold)
    idtp, idfp, idfn = _identity(gt, res, iou_threshold)
    return EvalReport(mota, fp, fn, idsw, idf1_score(idtp, idfp, idfn), gt_total,
                      idtp, idfp, idfn, trace)


def clear_metrics(gt_file, res_file, iou_threshold: float = DEFAULT_IOU):
    """(MOTA, FP, FN, IDSW)."""
    gt, res = _load(gt_file, res_file)
    mota, fp, fn, idsw, _, _ = _clear(gt, res, iou_threshold)
    return mota, fp, fn, idsw


def idf1(gt_file, res_file, iou_threshold: float = DEFAULT_IOU) -> float:
    gt, res = _load(gt_file, res_file)
    return idf1_score(*_identity(gt, res, iou_threshold))

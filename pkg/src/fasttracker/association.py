"""IoU-cost bipartite matching between tracklets and detections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import iou_matrix


@dataclass
class AssociationResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracklets: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)


def solve_assignment(costs, max_cost: float) -> AssociationResult:
    """One-to-one assignment restricted to pairs with ``cost <= max_cost``.

    Among assignments, the one with the most admissible pairs wins, and among
    those the lowest total cost.  Inadmissible pairs are priced above any
    admissible total so the solver never trades a match for a cheaper one.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    n, m = costs.shape
    if n == 0 or m == 0:
        return AssociationResult([], list(range(n)), list(range(m)))
    admissible = costs <= max_cost
    forbidden = float(min(n, m)) * max(1.0, float(np.abs(costs[admissible]).max(initial=0.0))) + 1.0
    work = np.where(admissible, costs, forbidden)
    rows, cols = kernels.linear_assignment(work)
    matches = [(int(r), int(c)) for r, c in zip(rows, cols) if admissible[r, c]]
    matched_r = {r for r, _ in matches}
    matched_c = {c for _, c in matches}
    return AssociationResult(
        matches,
        [i for i in range(n) if i not in matched_r],
        [j for j in range(m) if j not in matched_c],
    )


def assignment_cost(costs, result: AssociationResult) -> float:
    costs = np.asarray(costs, dtype=np.float64)
    return math.fsum(costs[i, j] for i, j in result.matches)


def cost_matrix(track_boxes: np.ndarray, track_classes: Sequence[int],
                det_boxes: np.ndarray, det_classes: Sequence[int]) -> np.ndarray:
    """``1 - IoU`` with cross-class pairs pinned at 1."""
    cost = 1.0 - iou_matrix(track_boxes, det_boxes)
    if cost.size:
        same = np.asarray(track_classes)[:, None] == np.asarray(det_classes)[None, :]
        cost[~same] = 1.0
    return cost


def associate(tracklets, detections, min_iou: float) -> AssociationResult:
    """Match tracklets to detections of the same class at IoU >= ``min_iou``.

    ``tracklets`` need ``.ltwh()`` (their current predicted box) and
    ``.class_id``; detections need ``.box`` and ``.class_id``.
    """
    t_boxes = np.array([t.ltwh() for t in tracklets], dtype=np.float64).reshape(-1, 4)
    d_boxes = np.array([d.box.as_tuple() for d in detections], dtype=np.float64).reshape(-1, 4)
    costs = cost_matrix(t_boxes, [t.class_id for t in tracklets],
                        d_boxes, [d.class_id for d in detections])
    result = solve_assignment(costs, 1.0 - min_iou)
    if min_iou <= 0.0:
        # a zero threshold must not pair boxes that do not touch or differ in class
        result = _drop_pairs(result, lambda i, j: costs[i, j] >= 1.0)
    return result


def _drop_pairs(result: AssociationResult, reject) -> AssociationResult:
    keep = [(i, j) for i, j in result.matches if not reject(i, j)]
    dropped = [(i, j) for i, j in result.matches if reject(i, j)]
    return AssociationResult(
        keep,
        sorted(result.unmatched_tracklets + [i for i, _ in dropped]),
        sorted(result.unmatched_detections + [j for _, j in dropped]),
    )

"""Box arithmetic, overlap ratios and point-in-quadrilateral tests.

Boxes use continuous pixel coordinates ``(left, top, width, height)`` with the
origin at the top-left corner and y pointing down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels

Point = tuple[float, float]

# Tolerance for treating a point as lying on a polygon edge, relative to the
# polygon's extent.
_EDGE_EPS = 1e-9


@dataclass(frozen=True, slots=True)
class Box:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"box extents must be positive, got {self.width}x{self.height}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> Box:
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    def center(self) -> Point:
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.width, self.height)


def _intersection_area(a: Box, b: Box) -> float:
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou(a: Box, b: Box) -> float:
    inter = _intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return min(inter / (a.area + b.area - inter), 1.0)


def coverage(target: Box, occluder: Box) -> float:
    """Share of ``target``'s area lying inside ``occluder``.

    Unlike IoU this saturates at 1 when a small box is swallowed by a large
    one, which is the situation occlusion detection cares about.
    """
    inter = _intersection_area(target, occluder)
    return min(inter / target.area, 1.0)


def boxes_to_array(boxes: Sequence[Box]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU between two ``(n, 4)`` ltwh arrays (or Box lists)."""
    if not isinstance(a, np.ndarray):
        a = boxes_to_array(a)
    if not isinstance(b, np.ndarray):
        b = boxes_to_array(b)
    return kernels.iou_matrix(np.ascontiguousarray(a, dtype=np.float64),
                              np.ascontiguousarray(b, dtype=np.float64))


def coverage_matrix(targets, occluders) -> np.ndarray:
    if not isinstance(targets, np.ndarray):
        targets = boxes_to_array(targets)
    if not isinstance(occluders, np.ndarray):
        occluders = boxes_to_array(occluders)
    return kernels.coverage_matrix(np.ascontiguousarray(targets, dtype=np.float64),
                                   np.ascontiguousarray(occluders, dtype=np.float64))


@dataclass(frozen=True)
class Quadrilateral:
    vertices: tuple[Point, Point, Point, Point]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) != 4:
            raise ValueError(f"quadrilateral needs exactly 4 vertices, got {len(verts)}")
        object.__setattr__(self, "vertices", verts)
        if abs(self.signed_area()) <= 0.0:
            raise ValueError("quadrilateral has zero area")
        # the two pairs of non-adjacent edges must not cross
        for i, j in ((0, 2), (1, 3)):
            if segments_intersect(*self.edge(i), *self.edge(j)):
                raise ValueError("quadrilateral is self-intersecting")
        xs = [v[0] for v in verts]
        ys = [v[1] for v in verts]
        object.__setattr__(self, "_bounds", (min(xs), min(ys), max(xs), max(ys)))

    def edge(self, i: int) -> tuple[Point, Point]:
        return self.vertices[i % 4], self.vertices[(i + 1) % 4]

    def signed_area(self) -> float:
        s = 0.0
        for i in range(4):
            (x0, y0), (x1, y1) = self.edge(i)
            s += x0 * y1 - x1 * y0
        return s / 2.0

    def centroid(self) -> Point:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return (sum(xs) / 4.0, sum(ys) / 4.0)

    def bounds(self) -> tuple[float, float, float, float]:
        """(min x, min y, max x, max y)."""
        return self._bounds

    def scale(self) -> float:
        x0, y0, x1, y1 = self._bounds
        return max(x1 - x0, y1 - y0)


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p: Point, a: Point, b: Point) -> bool:
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """True when closed segments p1-p2 and q1-q2 share at least one point."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    if d1 == 0 and _on_segment(p1, q1, q2):
        return True
    if d2 == 0 and _on_segment(p2, q1, q2):
        return True
    if d3 == 0 and _on_segment(q1, p1, p2):
        return True
    if d4 == 0 and _on_segment(q2, p1, p2):
        return True
    return False


def closest_point_on_segment(p: Point, a: Point, b: Point) -> tuple[Point, float]:
    """Nearest point to ``p`` on segment a-b, and the segment parameter t."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return a, 0.0
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / denom
    t = min(max(t, 0.0), 1.0)
    return (a[0] + t * dx, a[1] + t * dy), t


def point_in_polygon(p: Point, q: Quadrilateral) -> bool:
    """Crossing-number test; points on an edge count as inside."""
    x, y = float(p[0]), float(p[1])
    tol = _EDGE_EPS * max(q.scale(), 1.0)
    bx0, by0, bx1, by1 = q.bounds()
    if x < bx0 - tol or x > bx1 + tol or y < by0 - tol or y > by1 + tol:
        return False
    inside = False
    for i in range(4):
        (x0, y0), (x1, y1) = q.edge(i)
        if (y0 > y) != (y1 > y):
            x_cross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < x_cross:
                inside = not inside
    if inside:
        return True
    for i in range(4):
        a, b = q.edge(i)
        c, _ = closest_point_on_segment((x, y), a, b)
        if math.hypot(c[0] - x, c[1] - y) <= tol:
            return True
    return False

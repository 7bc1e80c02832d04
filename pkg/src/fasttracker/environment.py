"""Scene layout: quadrilateral regions with entrance/exit edges and motion cones.

A region's cone is centred on the entrance-to-exit flow direction and opens
by the angle between the two crossing diagonals that join the entrance and
exit edges.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .geometry import Point, Quadrilateral, closest_point_on_segment, point_in_polygon, segments_intersect
from .motion import KalmanState

REGION_KINDS = ("one_way_road", "two_way_road", "crosswalk")
BIDIRECTIONAL_KINDS = frozenset({"two_way_road", "crosswalk"})

PEDESTRIAN_CLASSES = frozenset({1})
VEHICLE_CLASSES = frozenset({2, 3, 4, 5})

_INWARD_NUDGE = 1e-6


class InvalidRegionError(ValueError):
    pass


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


@dataclass(frozen=True)
class Region:
    id: str
    kind: str
    quad: Quadrilateral
    entrance_edge: int
    exit_edge: int
    applicable_classes: Optional[frozenset] = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise InvalidRegionError(f"region {self.id!r}: unknown kind {self.kind!r}")
        for name, e in (("entrance_edge", self.entrance_edge), ("exit_edge", self.exit_edge)):
            if e not in (0, 1, 2, 3):
                raise InvalidRegionError(f"region {self.id!r}: {name} must be 0-3, got {e}")
        if self.entrance_edge == self.exit_edge:
            raise InvalidRegionError(f"region {self.id!r}: entrance and exit edge coincide")
        if self.applicable_classes is None:
            default = PEDESTRIAN_CLASSES if self.kind == "crosswalk" else VEHICLE_CLASSES
            object.__setattr__(self, "applicable_classes", default)
        else:
            object.__setattr__(self, "applicable_classes", frozenset(self.applicable_classes))

    def admits(self, class_id: int) -> bool:
        return class_id in self.applicable_classes

    @property
    def bidirectional(self) -> bool:
        return self.kind in BIDIRECTIONAL_KINDS

    def crossing_endpoints(self) -> tuple[Point, Point, Point, Point]:
        """Entrance (E1, E2) and exit (O1, O2) endpoints paired so E1-O2 crosses E2-O1."""
        e1, e2 = self.quad.edge(self.entrance_edge)
        o1, o2 = self.quad.edge(self.exit_edge)
        if not segments_intersect(e1, o2, e2, o1):
            o1, o2 = o2, o1
        return e1, e2, o1, o2

    def cone(self) -> tuple[float, float]:
        """(dominant flow, opening angle) in radians."""
        return dominant_flow(self), cone_opening_angle(self)


def diagonal_angle(e1: Point, e2: Point, o1: Point, o2: Point) -> float:
    """Angle between the diagonals E1->O2 and E2->O1, in [0, pi]."""
    ax, ay = o2[0] - e1[0], o2[1] - e1[1]
    bx, by = o1[0] - e2[0], o1[1] - e2[1]
    na, nb = math.hypot(ax, ay), math.hypot(bx, by)
    if na == 0.0 or nb == 0.0:
        raise InvalidRegionError("zero-length diagonal")
    # atan2 of cross and dot stays accurate near 0 and pi, where acos does not
    return math.atan2(abs(ax * by - ay * bx), ax * bx + ay * by)


def cone_opening_angle(r: Region) -> float:
    return diagonal_angle(*r.crossing_endpoints())


def dominant_flow(r: Region) -> float:
    (ax, ay), (bx, by) = r.quad.edge(r.entrance_edge)
    (cx, cy), (dx, dy) = r.quad.edge(r.exit_edge)
    fx = (cx + dx) / 2.0 - (ax + bx) / 2.0
    fy = (cy + dy) / 2.0 - (ay + by) / 2.0
    if fx == 0.0 and fy == 0.0:
        raise InvalidRegionError(f"region {r.id!r}: entrance and exit midpoints coincide")
    return wrap_angle(math.atan2(fy, fx))


@dataclass(frozen=True)
class EnvironmentMap:
    regions: tuple[Region, ...] = ()
    image_size: tuple[int, int] = (1920, 1080)
    _cones: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        ids = [r.id for r in self.regions]
        if len(set(ids)) != len(ids):
            raise InvalidRegionError("region ids must be unique")
        for r in self.regions:
            self._cones[r.id] = r.cone()

    def cone(self, r: Region) -> tuple[float, float]:
        return self._cones[r.id]

    def __bool__(self):
        return bool(self.regions)

    def to_dict(self, class_names: Optional[dict] = None) -> dict:
        out = []
        for r in self.regions:
            classes = sorted(r.applicable_classes)
            if class_names:
                classes = [class_names.get(c, c) for c in classes]
            out.append({
                "id": r.id,
                "kind": r.kind,
                "vertices": [[x, y] for x, y in r.quad.vertices],
                "entrance_edge": r.entrance_edge,
                "exit_edge": r.exit_edge,
                "classes": classes,
            })
        return {"image_size": list(self.image_size), "regions": out}


def region_lookup(m: EnvironmentMap, p: Point, class_id: int) -> Optional[Region]:
    """First region in declaration order that contains ``p`` and admits the class."""
    for r in m.regions:
        if r.admits(class_id) and point_in_polygon(p, r.quad):
            return r
    return None


def _rotate_to(d: tuple[float, float], angle: float) -> tuple[float, float]:
    mag = math.hypot(d[0], d[1])
    return (mag * math.cos(angle), mag * math.sin(angle))


def project_to_cone(displacement: Sequence[float], mu: float, theta: float,
                    bidirectional: bool = False) -> tuple[float, float]:
    """Rotate a displacement onto the nearest cone boundary if it lies outside.

    The cone spans ``mu +- theta/2``; a bidirectional region also admits the
    mirrored cone around ``mu + pi`` and the nearer of the two is used.
    Magnitude is preserved.
    """
    dx, dy = float(displacement[0]), float(displacement[1])
    if dx == 0.0 and dy == 0.0:
        return (dx, dy)
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"cone angle must lie in [0, pi], got {theta}")
    phi = math.atan2(dy, dx)
    half = theta / 2.0
    centers = (mu, mu + math.pi) if bidirectional else (mu,)
    best = None
    for c in centers:
        off = wrap_angle(phi - c)
        if abs(off) <= half:
            return (dx, dy)
        excess = abs(off) - half
        target = c + math.copysign(half, off)
        if best is None or excess < best[0]:
            best = (excess, target)
    return _rotate_to((dx, dy), best[1])


def _inward_normal(quad: Quadrilateral, i: int) -> tuple[float, float]:
    (x0, y0), (x1, y1) = quad.edge(i)
    dx, dy = x1 - x0, y1 - y0
    n = math.hypot(dx, dy)
    sign = 1.0 if quad.signed_area() > 0 else -1.0
    return (-dy * sign / n, dx * sign / n)


def clamp_point(p: Point, quad: Quadrilateral) -> Point:
    """Nearest point of the quadrilateral to ``p`` (``p`` itself when inside)."""
    if point_in_polygon(p, quad):
        return (float(p[0]), float(p[1]))
    best = None
    for i in range(4):
        a, b = quad.edge(i)
        c, t = closest_point_on_segment(p, a, b)
        d = math.hypot(c[0] - p[0], c[1] - p[1])
        if best is None or d < best[0]:
            best = (d, c, i, t)
    _, c, i, t = best
    if t <= 0.0 or t >= 1.0:
        # corner: average the normals of the two edges meeting there
        j = (i - 1) % 4 if t <= 0.0 else (i + 1) % 4
        n1, n2 = _inward_normal(quad, i), _inward_normal(quad, j)
        nx, ny = n1[0] + n2[0], n1[1] + n2[1]
        norm = math.hypot(nx, ny) or 1.0
        nx, ny = nx / norm, ny / norm
    else:
        nx, ny = _inward_normal(quad, i)
    step = _INWARD_NUDGE
    candidate = (c[0] + step * nx, c[1] + step * ny)
    if point_in_polygon(candidate, quad):
        return candidate
    gx, gy = quad.centroid()
    g = math.hypot(gx - c[0], gy - c[1]) or 1.0
    candidate = (c[0] + step * (gx - c[0]) / g, c[1] + step * (gy - c[1]) / g)
    return candidate if point_in_polygon(candidate, quad) else c


def clamp_to_roi(s: KalmanState, r: Region) -> KalmanState:
    """Move the state's center back inside the region; extents and velocities untouched."""
    cx, cy = s.center
    nx, ny = clamp_point((cx, cy), r.quad)
    if (nx, ny) == (cx, cy):
        return s
    mean = s.mean.copy()
    mean[0], mean[1] = nx, ny
    return s.replace(mean=mean)


def _ray_exit(anchor: Point, target: Point, quad: Quadrilateral) -> float:
    """Largest t in [0, 1] with anchor + t * (target - anchor) still inside ``quad``.

    ``anchor`` must be inside.  The first edge crossing along the segment
    bounds t; the result is shrunk until the point tests inside.
    """
    ax, ay = anchor
    dx, dy = target[0] - ax, target[1] - ay
    t_exit = 1.0
    for i in range(4):
        (x0, y0), (x1, y1) = quad.edge(i)
        ex, ey = x1 - x0, y1 - y0
        denom = dx * ey - dy * ex
        if denom == 0.0:
            continue
        t = ((x0 - ax) * ey - (y0 - ay) * ex) / denom
        u = ((x0 - ax) * dy - (y0 - ay) * dx) / denom
        if 0.0 <= t < t_exit and -1e-12 <= u <= 1.0 + 1e-12:
            t_exit = t
    while t_exit > 0.0 and not point_in_polygon((ax + t_exit * dx, ay + t_exit * dy), quad):
        t_exit = t_exit * (1.0 - 1e-9) - 1e-15
    return max(t_exit, 0.0)


def apply_constraints(s: KalmanState, m: EnvironmentMap, class_id: int,
                      anchor: Optional[Point]) -> KalmanState:
    """Cone projection then region clamp, as used on every predicted state.

    ``anchor`` is the track's center ``N`` frames ago; without it the cone
    step is skipped.  When the nearest-point clamp would swing the motion back
    out of the cone, the projected point is instead pulled back along its own
    ray to the region boundary, so both constraints hold.
    """
    r = region_lookup(m, s.center, class_id)
    if r is None:
        return s
    if anchor is None:
        return clamp_to_roi(s, r)
    mu, theta = m.cone(r)
    cx, cy = s.center
    d = (cx - anchor[0], cy - anchor[1])
    px, py = project_to_cone(d, mu, theta, r.bidirectional)
    if (px, py) != d:
        mean = s.mean.copy()
        mean[0], mean[1] = anchor[0] + px, anchor[1] + py
        s = s.replace(mean=mean)
    out = clamp_to_roi(s, r)
    if out is s or not point_in_polygon(anchor, r.quad):
        return out
    ox, oy = out.center
    dc = (ox - anchor[0], oy - anchor[1])
    if project_to_cone(dc, mu, theta, r.bidirectional) == dc:
        return out
    t = _ray_exit(anchor, s.center, r.quad)
    mean = s.mean.copy()
    mean[0], mean[1] = anchor[0] + t * px, anchor[1] + t * py
    return s.replace(mean=mean)


def region_from_dict(d: dict, class_ids: Optional[dict] = None) -> Region:
    for key in ("id", "kind", "vertices", "entrance_edge", "exit_edge"):
        if key not in d:
            raise InvalidRegionError(f"region entry missing key {key!r}")
    classes = d.get("classes")
    if classes is not None:
        resolved = []
        for c in classes:
            if isinstance(c, str):
                if class_ids is None or c not in class_ids:
                    raise InvalidRegionError(f"region {d['id']!r}: unknown class name {c!r}")
                resolved.append(class_ids[c])
            else:
                resolved.append(int(c))
        classes = frozenset(resolved)
    verts = d["vertices"]
    if len(verts) != 4:
        raise InvalidRegionError(f"region {d['id']!r}: needs exactly 4 vertices")
    try:
        quad = Quadrilateral(tuple((float(x), float(y)) for x, y in verts))
    except ValueError as exc:
        raise InvalidRegionError(f"region {d['id']!r}: {exc}") from exc
    return Region(str(d["id"]), d["kind"], quad, int(d["entrance_edge"]), int(d["exit_edge"]), classes)


def map_from_dict(doc: dict, class_ids: Optional[dict] = None) -> EnvironmentMap:
    size = doc.get("image_size", [1920, 1080])
    regions = [region_from_dict(r, class_ids) for r in doc.get("regions", [])]
    return EnvironmentMap(tuple(regions), (int(size[0]), int(size[1])))


def load_map(path, class_ids: Optional[dict] = None) -> EnvironmentMap:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return map_from_dict(doc, class_ids)


def save_map(m: EnvironmentMap, path, class_names: Optional[dict] = None) -> None:
    Path(path).write_text(json.dumps(m.to_dict(class_names), indent=2) + "\n", encoding="utf-8")

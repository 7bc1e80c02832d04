"""Seeded synthetic traffic scenes with known ground truth.

Four scenario families:

``crossing_occlusion``
    Pairs of objects in their own horizontal band.  A slow pedestrian walks
    east in the far lane while a wide vehicle drives west in the near lane and
    passes in front of it.  During the scripted window the pedestrian is at
    least 70 % covered and emits no detections.
``dropout``
    Same geometry, but the covered pedestrian keeps emitting detections with
    confidence decayed into the low band.
``platoon``
    Straight lanes of same-speed objects that never interact.  Objects leaving
    the frame are replaced at the opposite edge under a new identity.
``intersection_flow``
    A four-arm junction with straight and right-turning vehicles plus a
    pedestrian crosswalk.  Flows interact inside the junction.

Every generator returns ground truth, detections (with the gt id they came
from) and an environment map whose cones agree with the lanes.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .environment import EnvironmentMap, Region, save_map
from .geometry import Box, Quadrilateral, coverage_matrix
from .mot_io import Detection, GroundTruthBox, write_detections, write_ground_truth

SCENARIOS = ("crossing_occlusion", "platoon", "intersection_flow", "dropout")
DENSITY_LADDER = (12, 24, 36, 48)

PEDESTRIAN, CAR, TRUCK, BUS, MOTORCYCLE = 1, 2, 3, 4, 5
_SIZES = {PEDESTRIAN: (28.0, 64.0), CAR: (80.0, 45.0), TRUCK: (140.0, 70.0),
          BUS: (150.0, 70.0), MOTORCYCLE: (40.0, 35.0)}

# crossing geometry
_BAND = 130.0
_BAND_MARGIN = 50.0
_WALKER = (32.0, 72.0)
_OCCLUDER = (150.0, 110.0)
_OCCLUDER_DY = 15.0
_WALKER_SPEED = 1.5
_DEFAULT_WINDOW = 10


class GenerationError(ValueError):
    """The requested layout cannot produce the scripted occlusions."""


@dataclass(frozen=True)
class NoiseModel:
    center_std: float = 1.0
    extent_std: float = 0.5
    visible_conf: tuple[float, float] = (0.7, 0.99)
    partial_conf: tuple[float, float] = (0.25, 0.6)
    partial_threshold: float = 0.3


@dataclass(frozen=True)
class OcclusionWindow:
    occluder: int
    occluded: int
    start: int
    end: int


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n_objects: int
    n_frames: int
    image_size: tuple[int, int] = (1920, 1080)
    occlusion_windows: tuple[OcclusionWindow, ...] = ()
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}; choose from {', '.join(SCENARIOS)}")
        if self.n_objects < 1 or self.n_frames < 1:
            raise ValueError("n_objects and n_frames must be positive")
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))
        wins = tuple(w if isinstance(w, OcclusionWindow) else OcclusionWindow(*w)
                     for w in self.occlusion_windows)
        object.__setattr__(self, "occlusion_windows", wins)
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseModel(**self.noise))
        for w in wins:
            if w.occluder == w.occluded:
                raise ValueError(f"window {w}: occluder and occluded must differ")
            if not 1 <= w.start <= w.end <= self.n_frames:
                raise ValueError(f"window {w}: must lie within [1, {self.n_frames}]")
        if self.noise.center_std < 0 or self.noise.extent_std < 0:
            raise ValueError("noise std must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["image_size"] = list(self.image_size)
        d["occlusion_windows"] = [asdict(w) for w in self.occlusion_windows]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        d["occlusion_windows"] = tuple(OcclusionWindow(**w) if isinstance(w, dict) else OcclusionWindow(*w)
                                       for w in d.get("occlusion_windows", ()))
        noise = d.get("noise", {})
        if isinstance(noise, dict):
            noise = {k: tuple(v) if isinstance(v, list) else v for k, v in noise.items()}
            d["noise"] = NoiseModel(**noise)
        return cls(**d)


@dataclass
class _Agent:
    id: int
    class_id: int
    w: float
    h: float
    frames: np.ndarray
    cx: np.ndarray
    cy: np.ndarray


@dataclass
class Scenario:
    spec: ScenarioSpec
    ground_truth: list[GroundTruthBox]
    detections: list[Detection]
    sources: list[int]
    env_map: EnvironmentMap
    windows: tuple[OcclusionWindow, ...]

    def detections_by_frame(self) -> dict[int, list[Detection]]:
        out: dict[int, list[Detection]] = {f: [] for f in range(1, self.spec.n_frames + 1)}
        for d in self.detections:
            out[d.frame].append(d)
        return out


def _rect(x0, y0, x1, y1):
    return Quadrilateral(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def _lane_region(rid, y0, y1, width, eastbound, classes, kind="one_way_road"):
    # edge 3 is the left side (x = 0), edge 1 the right side
    entrance, exit_ = (3, 1) if eastbound else (1, 3)
    return Region(rid, kind, _rect(0.0, y0, float(width), y1), entrance, exit_, frozenset(classes))


# -- crossing / dropout -------------------------------------------------------

def _default_windows(spec: ScenarioSpec) -> tuple[OcclusionWindow, ...]:
    pairs = spec.n_objects // 2
    out = []
    for k in range(pairs):
        start = 20 + (3 * k) % 15
        end = start + _DEFAULT_WINDOW - 1
        if end + 10 > spec.n_frames:
            raise GenerationError(f"n_frames={spec.n_frames} too short for a window ending at frame {end}")
        out.append(OcclusionWindow(occluder=2 * k + 2, occluded=2 * k + 1, start=start, end=end))
    return tuple(out)


def _crossing(spec: ScenarioSpec, rng: np.random.Generator):
    W, H = spec.image_size
    windows = spec.occlusion_windows or _default_windows(spec)
    ids = set(range(1, spec.n_objects + 1))
    used = set()
    for w in windows:
        for oid in (w.occluder, w.occluded):
            if oid not in ids:
                raise GenerationError(f"window references object {oid}, outside 1..{spec.n_objects}")
            if oid in used:
                raise GenerationError(f"object {oid} appears in more than one occlusion window")
            used.add(oid)
    fillers = sorted(ids - used)
    n_bands = len(windows) + len(fillers)
    if _BAND_MARGIN * 2 + _BAND * n_bands > H:
        raise GenerationError(f"{n_bands} bands of {_BAND:.0f} px do not fit an image {H} px tall")

    frames = np.arange(1, spec.n_frames + 1, dtype=np.float64)
    agents, regions = [], []
    ww, wh = _WALKER
    ow, oh = _OCCLUDER
    band = 0
    for w in windows:
        yb = _BAND_MARGIN + _BAND * band + _BAND / 2
        band += 1
        length = w.end - w.start + 1
        # relative speed that takes coverage from 0.9 at the window start to
        # 0.25 on the first frame after it
        d0 = ow / 2 - 0.4 * ww
        vr = (ow - 0.15 * ww) / length
        v_walk = min(_WALKER_SPEED, vr / 4)
        v_occ = vr - v_walk
        t_cross = w.start + d0 / vr
        span_occ = v_occ * (spec.n_frames - 1)
        if span_occ > W - ow:
            raise GenerationError(f"window {w}: occluder needs {span_occ:.0f} px of travel, image is {W} px wide")
        x_mid = W / 2 - v_occ * (2 * t_cross - 1 - spec.n_frames) / 2
        x_occ = x_mid - v_occ * (frames - t_cross)
        x_walk = x_mid + v_walk * (frames - t_cross)
        if x_walk.min() - ww / 2 < 0 or x_walk.max() + ww / 2 > W:
            raise GenerationError(f"window {w}: occluded object leaves the image")
        agents.append(_Agent(w.occluded, PEDESTRIAN, ww, wh, frames, x_walk, np.full_like(frames, yb)))
        agents.append(_Agent(w.occluder, TRUCK, ow, oh, frames, x_occ, np.full_like(frames, yb + _OCCLUDER_DY)))
        regions.append(_lane_region(f"walk{band}", yb - 25, yb + 25, W, True, {PEDESTRIAN}))
        regions.append(_lane_region(f"road{band}", yb + _OCCLUDER_DY - 25, yb + _OCCLUDER_DY + 25,
                                    W, False, {CAR, TRUCK, BUS, MOTORCYCLE}))
    for oid in fillers:
        yb = _BAND_MARGIN + _BAND * band + _BAND / 2
        band += 1
        x0 = rng.uniform(ww, W / 3)
        x = x0 + _WALKER_SPEED * (frames - 1)
        if x.max() + ww / 2 > W:
            raise GenerationError("n_frames too long for a filler walker to stay in frame")
        agents.append(_Agent(oid, PEDESTRIAN, ww, wh, frames, x, np.full_like(frames, yb)))
        regions.append(_lane_region(f"walk{band}", yb - 25, yb + 25, W, True, {PEDESTRIAN}))
    return agents, regions, tuple(windows)


# -- platoon ------------------------------------------------------------------

def _platoon(spec: ScenarioSpec, rng: np.random.Generator):
    W, H = spec.image_size
    pitch, margin, per_lane = 90.0, 60.0, 6
    max_lanes = int((H - 2 * margin) // pitch)
    n_lanes = min(max_lanes, max(1, math.ceil(spec.n_objects / per_lane)))
    if n_lanes * per_lane < spec.n_objects:
        n_lanes = max_lanes
    counts = [spec.n_objects // n_lanes + (1 if i < spec.n_objects % n_lanes else 0) for i in range(n_lanes)]
    frames = np.arange(1, spec.n_frames + 1, dtype=np.float64)
    lanes, regions = [], []
    for i, k in enumerate(counts):
        yc = margin + pitch * i + pitch / 2
        eastbound = i % 2 == 0
        if i % 4 == 3:
            cls, speed = PEDESTRIAN, rng.uniform(1.0, 2.0)
        else:
            cls = int(rng.choice([CAR, CAR, TRUCK, MOTORCYCLE]))
            speed = rng.uniform(2.0, 6.0)
        w, h = _SIZES[cls]
        loop = W + w
        if k and loop / k < w + 20:
            raise GenerationError(f"lane {i}: {k} objects of width {w:.0f} do not fit")
        lanes.append((yc, eastbound, cls, speed, w, h, k, rng.uniform(0, loop)))
        classes = {PEDESTRIAN} if cls == PEDESTRIAN else {CAR, TRUCK, BUS, MOTORCYCLE}
        regions.append(_lane_region(f"lane{i}", yc - 30, yc + 30, W, eastbound, classes))

    # identities: one per (lane, slot, lap), numbered in order of first appearance
    agents: dict[tuple, dict] = {}
    order = []
    for f in frames:
        for li, (yc, east, cls, speed, w, h, k, phase) in enumerate(lanes):
            loop = W + w
            for j in range(k):
                s = phase + j * loop / k + speed * (f - 1)
                lap = int(s // loop)
                x = (s % loop) - w / 2
                if not east:
                    x = W - x
                if not 0.0 <= x <= W:
                    continue
                key = (li, j, lap)
                if key not in agents:
                    agents[key] = {"cls": cls, "w": w, "h": h, "f": [], "x": [], "y": []}
                    order.append(key)
                a = agents[key]
                a["f"].append(f)
                a["x"].append(x)
                a["y"].append(yc)
    out = []
    for n, key in enumerate(order, start=1):
        a = agents[key]
        out.append(_Agent(n, a["cls"], a["w"], a["h"], np.array(a["f"]), np.array(a["x"]), np.array(a["y"])))
    return out, regions, ()


# -- intersection -------------------------------------------------------------

def _polyline_at(points: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    seg = np.hypot(*np.diff(points, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return np.interp(s, cum, points[:, 0]), np.interp(s, cum, points[:, 1])


def _path_length(points: np.ndarray) -> float:
    return float(np.hypot(*np.diff(points, axis=0).T).sum())


def _intersection(spec: ScenarioSpec, rng: np.random.Generator):
    W, H = spec.image_size
    cx, cy = W / 2, H / 2
    lane_off, half_box, radius = 30.0, 80.0, 40.0
    far = max(W, H)

    def rot(pts, k):
        # quarter turns about the junction center; image y points down
        p = np.asarray(pts, dtype=np.float64) - (cx, cy)
        for _ in range(k):
            p = np.column_stack([-p[:, 1], p[:, 0]])
        return p + (cx, cy)

    # eastbound approach, drawn once and rotated for the other three arms
    y_e = cy + lane_off
    straight = np.array([[cx - far, y_e], [cx + far, y_e]])
    corner_x = cx - lane_off
    arc_c = (corner_x - radius, y_e + radius)
    arc = [(arc_c[0] + radius * math.sin(a), arc_c[1] - radius * math.cos(a))
           for a in np.linspace(0.0, math.pi / 2, 7)]
    turn = np.array([[cx - far, y_e], *arc, [corner_x, cy + far]])

    n_peds = max(1, spec.n_objects // 6)
    n_veh = spec.n_objects - n_peds
    slots = [("veh", i % 4) for i in range(n_veh)] + [("ped", i % 2) for i in range(n_peds)]
    speeds = {arm: rng.uniform(4.0, 7.0) for arm in range(4)}
    cross_x0, cross_x1 = cx + half_box + 40, cx + half_box + 100
    cross_y0, cross_y1 = cy - half_box - 20, cy + half_box + 20
    frames_all = np.arange(1, spec.n_frames + 1, dtype=np.float64)

    raw = []
    per_arm = {}
    for kind, arm in slots:
        per_arm.setdefault((kind, arm), 0)
        per_arm[(kind, arm)] += 1
    seen = {}
    for kind, arm in slots:
        j = seen.get((kind, arm), 0)
        seen[(kind, arm)] = j + 1
        k = per_arm[(kind, arm)]
        if kind == "veh":
            speed = speeds[arm]
            cls = int(rng.choice([CAR, CAR, CAR, TRUCK, BUS, MOTORCYCLE]))
            length = _path_length(rot(straight, arm))
            period = length / speed / k * k
            offset = -j * period / k - rng.uniform(0, period / k / 3)
        else:
            speed = rng.uniform(1.0, 1.6)
            cls = PEDESTRIAN
            x = cross_x0 + 15 + (cross_x1 - cross_x0 - 30) * (j + 0.5) / k
            ys, ye = (cross_y0 - 10, cross_y1 + 10) if arm == 0 else (cross_y1 + 10, cross_y0 - 10)
            walk = np.array([[x, ys], [x, ye]])
            length = _path_length(walk)
            period = length / speed + 20
            offset = -rng.uniform(0, period)
        lap = 0
        t0 = offset
        while t0 < spec.n_frames:
            if kind == "veh":
                path = rot(turn if rng.random() < 0.3 else straight, arm)
            else:
                path = walk
            L = _path_length(path)
            mask = (frames_all >= t0) & (frames_all <= t0 + L / speed)
            f = frames_all[mask]
            if f.size:
                x, y = _polyline_at(path, speed * (f - t0))
                inside = (x >= 0) & (x <= W) & (y >= 0) & (y <= H)
                if inside.any():
                    w, h = _SIZES[cls]
                    raw.append((float(f[inside][0]), len(raw), cls, w, h, f[inside], x[inside], y[inside]))
            t0 += period
            lap += 1
    raw.sort()
    agents = [_Agent(n, cls, w, h, f, x, y) for n, (_, _, cls, w, h, f, x, y) in enumerate(raw, start=1)]

    veh = {CAR, TRUCK, BUS, MOTORCYCLE}
    regions = [Region("crosswalk", "crosswalk", _rect(cross_x0, cross_y0, cross_x1, cross_y1), 0, 2,
                      frozenset({PEDESTRIAN}))]
    road_half = 2 * lane_off
    regions.append(Region("west", "two_way_road", _rect(0.0, cy - road_half, cx - half_box, cy + road_half),
                          3, 1, frozenset(veh)))
    regions.append(Region("east", "two_way_road", _rect(cx + half_box, cy - road_half, float(W), cy + road_half),
                          3, 1, frozenset(veh)))
    regions.append(Region("north", "two_way_road", _rect(cx - road_half, 0.0, cx + road_half, cy - half_box),
                          0, 2, frozenset(veh)))
    regions.append(Region("south", "two_way_road", _rect(cx - road_half, cy + half_box, cx + road_half, float(H)),
                          0, 2, frozenset(veh)))
    return agents, regions, ()


# -- rendering ------------------------------------------------------------------

def _render(spec: ScenarioSpec, agents: list[_Agent], windows, rng: np.random.Generator):
    noise = spec.noise
    decay = spec.name == "dropout"
    hidden = {}
    for w in windows:
        for f in range(w.start, w.end + 1):
            hidden[(f, w.occluded)] = True

    per_frame: dict[int, list[tuple]] = {}
    for a in agents:
        for f, x, y in zip(a.frames.astype(int), a.cx, a.cy):
            per_frame.setdefault(int(f), []).append((a.id, a.class_id, x, y, a.w, a.h))

    gt, dets, sources = [], [], []
    for f in range(1, spec.n_frames + 1):
        objs = sorted(per_frame.get(f, []))
        if not objs:
            continue
        ltwh = np.array([(x - w / 2, y - h / 2, w, h) for _, _, x, y, w, h in objs])
        cov = coverage_matrix(ltwh, ltwh)
        bottoms = ltwh[:, 1] + ltwh[:, 3]
        # only objects lower in the image (closer to the camera) occlude
        in_front = bottoms[None, :] > bottoms[:, None]
        occ = np.where(in_front, cov, 0.0).max(axis=1) if len(objs) > 1 else np.zeros(1)
        for (oid, cls, _, _, w, h), box, level in zip(objs, ltwh, occ):
            gt.append(GroundTruthBox(f, oid, Box(*box), cls, round(float(1.0 - level), 4)))
            jitter = rng.normal(0.0, 1.0, 4) * (noise.center_std, noise.center_std,
                                                noise.extent_std, noise.extent_std)
            u = rng.random()
            if (f, oid) in hidden:
                if not decay:
                    continue
                lo, hi = noise.partial_conf
            elif level >= noise.partial_threshold:
                lo, hi = noise.partial_conf
            else:
                lo, hi = noise.visible_conf
            conf = round(lo + (hi - lo) * u, 4)
            cx, cy = box[0] + box[2] / 2 + jitter[0], box[1] + box[3] / 2 + jitter[1]
            dw, dh = max(box[2] + jitter[2], 1.0), max(box[3] + jitter[3], 1.0)
            dets.append(Detection(f, Box.from_center(cx, cy, dw, dh), conf, cls))
            sources.append(oid)
    return gt, dets, sources


def _check_windows(windows, gt: list[GroundTruthBox]):
    boxes = {(g.frame, g.id): g.box for g in gt}
    for w in windows:
        a, b = boxes.get((w.start, w.occluded)), boxes.get((w.start, w.occluder))
        if a is None or b is None:
            raise GenerationError(f"window {w}: an object is not in frame at the window start")
        cov = coverage_matrix(np.array([a.as_tuple()]), np.array([b.as_tuple()]))[0, 0]
        if cov < 0.7:
            raise GenerationError(f"window {w}: coverage {cov:.3f} < 0.7 at window start")


_BUILDERS = {"crossing_occlusion": _crossing, "dropout": _crossing,
             "platoon": _platoon, "intersection_flow": _intersection}


def generate(spec: ScenarioSpec) -> Scenario:
    """Build the scenario in memory.  Identical specs give identical output."""
    rng = np.random.default_rng(spec.seed)
    agents, regions, windows = _BUILDERS[spec.name](spec, rng)
    gt, dets, sources = _render(spec, agents, windows, rng)
    _check_windows(windows, gt)
    env = EnvironmentMap(tuple(regions), spec.image_size)
    return Scenario(spec, gt, dets, sources, env, windows)


def write_scenario(scenario: Scenario, out_dir) -> dict[str, Path]:
    """Write ``det.txt``, ``gt.txt``, ``map.json`` and ``spec.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"det": out / "det.txt", "gt": out / "gt.txt", "map": out / "map.json", "spec": out / "spec.json"}
    write_detections(scenario.detections, paths["det"])
    write_ground_truth(scenario.ground_truth, paths["gt"])
    save_map(scenario.env_map, paths["map"])
    spec = scenario.spec.to_dict()
    spec["occlusion_windows"] = [asdict(w) for w in scenario.windows]
    paths["spec"].write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def generate_files(spec: ScenarioSpec, out_dir) -> dict[str, Path]:
    return write_scenario(generate(spec), out_dir)


def default_spec(name: str, seed: int = 0, n_objects: Optional[int] = None,
                 n_frames: Optional[int] = None, noise: Optional[NoiseModel] = None) -> ScenarioSpec:
    """A spec with frame count and image size that suit the named scenario."""
    crossing = name in ("crossing_occlusion", "dropout")
    n_objects = n_objects or (2 if crossing else 12)
    n_frames = n_frames or (80 if crossing else 150)
    if crossing:
        bands = math.ceil(n_objects / 2)
        height = max(1080, int(2 * _BAND_MARGIN + _BAND * bands))
    else:
        height = max(1080, int(120 + 90 * math.ceil(n_objects / 6)))
    return ScenarioSpec(name, n_objects, n_frames, (1920, height), (), noise or NoiseModel(), seed)


def scenario_suite(seed_base: int, count: int) -> list[ScenarioSpec]:
    """Specs cycling through the four scenario names over a density ladder up to 48 objects."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = []
    for i in range(count):
        name = SCENARIOS[i % len(SCENARIOS)]
        density = DENSITY_LADDER[(i + i // len(SCENARIOS)) % len(DENSITY_LADDER)]
        out.append(default_spec(name, seed=seed_base + i, n_objects=density))
    return out


def inject_duplicates(dets: list[Detection], rate: float, seed: int = 0,
                      shift: float = 0.03) -> list[Detection]:
    """Add a near-copy (IoU about 0.89) of a random ``rate`` share of the detections.

    Each copy is moved by ``shift`` of its width and height and scored just
    below its source, which is how double-firing detectors usually behave.
    """
    rng = np.random.default_rng(seed)
    out = []
    for d in dets:
        out.append(d)
        if d.confidence > 0 and rng.random() < rate:
            b = d.box
            sx = shift * b.width * (1 if rng.random() < 0.5 else -1)
            sy = shift * b.height * (1 if rng.random() < 0.5 else -1)
            out.append(Detection(d.frame, Box(b.left + sx, b.top + sy, b.width, b.height),
                                 round(d.confidence * 0.98, 4), d.class_id))
    return out

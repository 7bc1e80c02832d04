"""Tracker configuration, class table and per-class motion defaults."""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from .motion import ClassMotionProfile

DEFAULT_CLASS_NAMES = {1: "pedestrian", 2: "car", 3: "truck", 4: "bus", 5: "motorcycle"}
PEDESTRIAN = 1

ENV_PREFIX = "FASTTRACK_"


class ConfigError(ValueError):
    """A configuration value violates its documented range."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def default_profiles() -> dict[int, ClassMotionProfile]:
    # Vehicles: 3x the pedestrian velocity noise, stronger damping, longer
    # rewind and larger enlargement.
    ped = ClassMotionProfile(PEDESTRIAN, process_noise_pos=1.0, process_noise_vel=0.5,
                             measurement_noise=1.0, gamma_velo=0.9, delta_reset=3, beta_enlarge=1.1)
    profiles = {PEDESTRIAN: ped}
    for cid in (2, 3, 4, 5):
        profiles[cid] = ClassMotionProfile(cid, process_noise_pos=1.0, process_noise_vel=1.5,
                                           measurement_noise=1.0, gamma_velo=0.75, delta_reset=4,
                                           beta_enlarge=1.2)
    return profiles


# (key, default, help) for the scalar knobs; the CLI builds its flags from this.
SCALAR_FIELDS = {
    "tau_high": (0.65, "high-confidence detection threshold"),
    "tau_low": (0.2, "low-confidence detection threshold"),
    "iou_stage1": (0.5, "IoU threshold for matching high-confidence detections"),
    "iou_stage2": (0.6, "IoU threshold for matching low-confidence detections"),
    "cp_min": (0.7, "coverage needed to mark an unmatched tracklet occluded (>1 disables)"),
    "k_init": (0.8, "max IoU against live tracklets for a new tracklet"),
    "t_occ": (30, "frames a tracklet may stay occluded"),
    "direction_window_n": (5, "frames spanned by the motion-direction estimate"),
    "ema_alpha": (0.8, "EMA momentum for box extents"),
    "nms_iou": (0.75, "IoU for optional ingest NMS"),
    "nms": (False, "apply class-aware NMS to incoming detections"),
    "grace_frames": (0, "frames an unmatched, unoccluded tracklet survives"),
}


@dataclass
class TrackerConfig:
    tau_high: float = 0.65
    tau_low: float = 0.2
    iou_stage1: float = 0.5
    iou_stage2: float = 0.6
    cp_min: float = 0.7
    k_init: float = 0.8
    t_occ: int = 30
    direction_window_n: int = 5
    ema_alpha: float = 0.8
    nms_iou: float = 0.75
    nms: bool = False
    grace_frames: int = 0
    profiles: dict[int, ClassMotionProfile] = field(default_factory=default_profiles)
    class_names: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_CLASS_NAMES))

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.tau_low < self.tau_high <= 1.0:
            key = "tau_low" if not 0.0 <= self.tau_low <= 1.0 else "tau_high"
            raise ConfigError(key, f"need 0 <= tau_low < tau_high <= 1 (tau_low={self.tau_low}, "
                                   f"tau_high={self.tau_high})")
        for key in ("iou_stage1", "iou_stage2", "k_init", "ema_alpha", "nms_iou"):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(key, f"must lie in [0, 1], got {v}")
        # cp_min above 1 is the documented switch that disables occlusion handling
        if self.cp_min < 0.0:
            raise ConfigError("cp_min", f"must be non-negative, got {self.cp_min}")
        if self.t_occ < 1:
            raise ConfigError("t_occ", f"must be >= 1, got {self.t_occ}")
        if self.direction_window_n < 1:
            raise ConfigError("direction_window_n", f"must be >= 1, got {self.direction_window_n}")
        if self.grace_frames < 0:
            raise ConfigError("grace_frames", f"must be >= 0, got {self.grace_frames}")

    def profile(self, class_id: int) -> ClassMotionProfile:
        p = self.profiles.get(class_id)
        if p is None:
            p = dataclasses.replace(self.profiles[PEDESTRIAN], class_id=class_id)
            self.profiles[class_id] = p
        return p

    @property
    def class_ids(self) -> dict[str, int]:
        return {name: cid for cid, name in self.class_names.items()}


_PROFILE_KEYS = {f.name for f in dataclasses.fields(ClassMotionProfile)} - {"class_id"}


def _coerce(key: str, value: Any) -> Any:
    default = SCALAR_FIELDS[key][0]
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(default, int):
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot interpret {value!r} as {type(default).__name__}") from None


def config_from_dict(doc: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> TrackerConfig:
    """Build a config from a JSON-style mapping; absent keys keep defaults.

    Recognised extra keys: ``classes`` (``{"id": "name"}``) and ``profiles``
    (``{"<class id or name>": {profile fields}}``).
    """
    merged = dict(doc)
    merged.update(overrides or {})
    unknown = set(merged) - set(SCALAR_FIELDS) - {"classes", "profiles"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(key, "unknown configuration key")
    kwargs = {k: _coerce(k, v) for k, v in merged.items() if k in SCALAR_FIELDS}

    class_names = dict(DEFAULT_CLASS_NAMES)
    if "classes" in merged:
        try:
            class_names = {int(k): str(v) for k, v in merged["classes"].items()}
        except (AttributeError, ValueError):
            raise ConfigError("classes", "expected a mapping of integer ids to names") from None
    name_to_id = {v: k for k, v in class_names.items()}

    profiles = default_profiles()
    for raw_key, fields in (merged.get("profiles") or {}).items():
        key = f"profiles.{raw_key}"
        if raw_key in name_to_id:
            cid = name_to_id[raw_key]
        else:
            try:
                cid = int(raw_key)
            except ValueError:
                raise ConfigError(key, "unknown class") from None
        bad = set(fields) - _PROFILE_KEYS
        if bad:
            raise ConfigError(f"{key}.{sorted(bad)[0]}", "unknown profile field")
        base = profiles.get(cid) or dataclasses.replace(profiles[PEDESTRIAN], class_id=cid)
        try:
            profiles[cid] = dataclasses.replace(base, **fields)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    return TrackerConfig(profiles=profiles, class_names=class_names, **kwargs)


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict[str, str]:
    """Config keys taken from ``FASTTRACK_<KEY>`` environment variables."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in SCALAR_FIELDS:
                out[key] = value
    return out


def load_config(path=None, overrides: Optional[Mapping[str, Any]] = None) -> TrackerConfig:
    doc = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if text.strip():
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError("<document>", f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("<document>", "top level must be a JSON object")
    return config_from_dict(doc, overrides)

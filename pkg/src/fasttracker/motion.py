"""Class-aware constant-velocity Kalman filter and occlusion-time state operators.

State layout: ``[cx, cy, w, h, vx, vy, vw, vh]`` with center/extent in pixels
and velocities in pixels per frame.  All operations take a state and return a
new one; nothing is mutated in place.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .geometry import Box, Point

MIN_EXTENT = 1.0
# Extent velocities wander far less than center velocities.
_EXTENT_NOISE_SCALE = 0.1
_MAX_INNOVATION_COND = 1e12

_EYE4 = np.eye(4)


class NumericalError(ArithmeticError):
    """Raised when a filter or regression step hits a degenerate matrix."""


@dataclass(frozen=True)
class ClassMotionProfile:
    class_id: int
    process_noise_pos: float = 1.0
    process_noise_vel: float = 0.5
    measurement_noise: float = 1.0
    gamma_velo: float = 0.9
    delta_reset: int = 3
    beta_enlarge: float = 1.1

    def __post_init__(self):
        if not 0.0 < self.gamma_velo < 1.0:
            raise ValueError(f"gamma_velo must lie in (0, 1), got {self.gamma_velo}")
        if self.beta_enlarge < 1.0:
            raise ValueError(f"beta_enlarge must be >= 1, got {self.beta_enlarge}")
        if self.delta_reset < 0 or int(self.delta_reset) != self.delta_reset:
            raise ValueError(f"delta_reset must be a non-negative integer, got {self.delta_reset}")
        if min(self.process_noise_pos, self.process_noise_vel) < 0 or self.measurement_noise < 0:
            raise ValueError("noise standard deviations must be non-negative")
        qp = self.process_noise_pos ** 2
        qv = self.process_noise_vel ** 2
        qe = (self.process_noise_vel * _EXTENT_NOISE_SCALE) ** 2
        object.__setattr__(self, "_q", np.array([qp, qp, qp, qp, qv, qv, qe, qe]))

    def process_covariance(self) -> np.ndarray:
        return np.diag(self._q)


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray = field(repr=False)

    def __post_init__(self):
        m, c = self.mean, self.covariance
        if m.dtype != np.float64 or not m.flags.c_contiguous:
            object.__setattr__(self, "mean", np.ascontiguousarray(m, dtype=np.float64))
        if c.dtype != np.float64 or not c.flags.c_contiguous:
            object.__setattr__(self, "covariance", np.ascontiguousarray(c, dtype=np.float64))

    @property
    def center(self) -> Point:
        return (float(self.mean[0]), float(self.mean[1]))

    @property
    def extents(self) -> tuple[float, float]:
        return (float(self.mean[2]), float(self.mean[3]))

    @property
    def velocity(self) -> tuple[float, float]:
        return (float(self.mean[4]), float(self.mean[5]))

    def box(self) -> Box:
        cx, cy, w, h = self.mean[:4]
        return Box(float(cx - w / 2.0), float(cy - h / 2.0), float(w), float(h))

    def ltwh(self) -> np.ndarray:
        cx, cy, w, h = self.mean[:4]
        return np.array([cx - w / 2.0, cy - h / 2.0, w, h])

    def replace(self, mean=None, covariance=None) -> KalmanState:
        return KalmanState(self.mean.copy() if mean is None else mean,
                           self.covariance.copy() if covariance is None else covariance)


def _measurement(box: Box) -> np.ndarray:
    cx, cy = box.center()
    return np.array([cx, cy, box.width, box.height])


def _clamp_extents(mean: np.ndarray) -> None:
    mean[2] = max(mean[2], MIN_EXTENT)
    mean[3] = max(mean[3], MIN_EXTENT)


def initiate(box: Box, profile: ClassMotionProfile) -> KalmanState:
    """Fresh state at ``box`` with zero velocity."""
    mean = np.zeros(8)
    mean[:4] = _measurement(box)
    pos_std = 2.0 * max(profile.measurement_noise, 0.5)
    vel_std = 10.0 * max(profile.process_noise_vel, 0.1)
    std = [pos_std] * 4 + [vel_std, vel_std, vel_std * _EXTENT_NOISE_SCALE, vel_std * _EXTENT_NOISE_SCALE]
    return KalmanState(mean, np.diag(np.square(std)))


def predict(s: KalmanState, profile: ClassMotionProfile) -> KalmanState:
    mean, cov = kernels.kalman_predict(s.mean, s.covariance, profile._q)
    _clamp_extents(mean)
    return KalmanState(mean, cov)


def _check_innovation(P: np.ndarray, r: float) -> None:
    S = P[:4, :4]
    if not np.isfinite(S).all():
        raise NumericalError("innovation covariance is not finite")
    # with P PSD the smallest eigenvalue of S is at least r, so trace/r bounds cond(S)
    if r > 0.0 and (S[0, 0] + S[1, 1] + S[2, 2] + S[3, 3] + 4 * r) <= _MAX_INNOVATION_COND * r:
        return
    eig = np.linalg.eigvalsh(S + r * _EYE4)
    if eig[0] <= 0.0 or eig[-1] > _MAX_INNOVATION_COND * eig[0]:
        raise NumericalError("innovation covariance is ill-conditioned; check the noise profile")


def update(s: KalmanState, z: Box, profile: ClassMotionProfile) -> KalmanState:
    """Joseph-form measurement update with ``z`` as (cx, cy, w, h)."""
    r = profile.measurement_noise ** 2
    _check_innovation(s.covariance, r)
    try:
        mean, cov = kernels.kalman_update(s.mean, s.covariance, _measurement(z), r)
    except ValueError:
        raise NumericalError("innovation covariance is not positive definite") from None
    _clamp_extents(mean)
    return KalmanState(mean, cov)


def dampen_velocity(s: KalmanState, profile: ClassMotionProfile) -> KalmanState:
    """Scale planar velocity by gamma and rewind position by delta_reset frames.

    The rewind uses the velocity from before damping, which moves the center
    back toward where the object was last seen.
    """
    mean = s.mean.copy()
    v = mean[4:6].copy()
    mean[4:6] = profile.gamma_velo * v
    mean[0:2] = mean[0:2] - profile.delta_reset * v
    return s.replace(mean=mean)


def enlarge_box(s: KalmanState, profile: ClassMotionProfile) -> KalmanState:
    mean = s.mean.copy()
    mean[2:4] *= profile.beta_enlarge
    return s.replace(mean=mean)


def motion_direction(history: Sequence[tuple[int, Point]], window: int) -> Optional[float]:
    """Heading of the displacement over the last ``window`` frames, in (-pi, pi].

    ``history`` holds ``(frame, center)`` pairs in frame order; the newest
    entry is the current frame.  The reference point is the newest entry at or
    before ``current - window``.  Returns None for a zero displacement.
    """
    if not history:
        raise ValueError("empty history")
    frame_k, p_k = history[-1]
    ref = None
    for frame, p in reversed(history):
        if frame <= frame_k - window:
            ref = p
            break
    if ref is None:
        raise ValueError(f"history has no entry at or before frame {frame_k - window}")
    dx, dy = p_k[0] - ref[0], p_k[1] - ref[1]
    if dx == 0.0 and dy == 0.0:
        return None
    phi = math.atan2(dy, dx)
    return math.pi if phi == -math.pi else phi


def ema(prev, new, alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"EMA momentum must lie in [0, 1], got {alpha}")
    return alpha * prev + (1.0 - alpha) * new

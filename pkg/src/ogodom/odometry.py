"""Odometer-gyroscope dead reckoning on SE(2).

Each step turns an encoder tick increment into travelled distance, integrates
the bias-corrected yaw rate with the trapezoidal rule, and moves the wheel
centre along the constant-curvature arc joining the two samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameter, LengthMismatch, NonPositiveDt
from .ingest import SampleStream
from .se2 import compose, wrap_angle

# below this heading change the arc is replaced by its Taylor expansion
THETA_SMALL = 1e-6


@dataclass(frozen=True)
class Pose2:
    t: float
    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))
        if not all(np.isfinite([self.t, self.x, self.y, self.yaw])):
            raise InvalidParameter(f"non-finite pose {self}")


@dataclass(frozen=True)
class WheelModel:
    radius: float
    ticks_per_rev: int

    def __post_init__(self):
        if not 0.05 < self.radius < 2.0:
            raise InvalidParameter(f"wheel radius {self.radius} m outside (0.05, 2.0)")
        if int(self.ticks_per_rev) != self.ticks_per_rev or self.ticks_per_rev < 1:
            raise InvalidParameter(f"ticks_per_rev must be a positive integer, got {self.ticks_per_rev}")

    @property
    def metres_per_tick(self) -> float:
        return 2.0 * np.pi * self.radius / self.ticks_per_rev


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray
    # cumulative |d_i| travelled by the wheel; None for trajectories read from file
    distance: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> Pose2:
        return Pose2(float(self.t[i]), float(self.x[i]), float(self.y[i]), float(self.yaw[i]))

    @property
    def poses(self):
        return self.x, self.y, self.yaw

    def path_length(self) -> float:
        """Distance travelled along the arcs; the chord sum when that is unknown."""
        if self.distance is not None and len(self.distance):
            return float(self.distance[-1])
        return self.chord_length()

    def chord_length(self) -> float:
        """Sum of straight-line distances between consecutive poses.

        On curved steps a chord is shorter than the arc by a factor
        sin(a/2)/(a/2) for heading change a, so this under-reads the
        travelled distance by roughly a**2/24 per step.
        """
        return float(np.hypot(np.diff(self.x), np.diff(self.y)).sum())


def tick_distance(model: WheelModel, ticks_a, ticks_b):
    return 2.0 * np.pi * model.radius * (np.asarray(ticks_b) - np.asarray(ticks_a)) / model.ticks_per_rev


def heading_increment(omega_a, omega_b, dt):
    dt_arr = np.asarray(dt)
    if np.any(dt_arr <= 0):
        raise NonPositiveDt(f"dt must be positive, got {dt}")
    return (np.asarray(omega_a) + np.asarray(omega_b)) * dt_arr / 2.0


def arc_displacement(d, dtheta):
    """Body-frame displacement for travelling ``d`` along an arc turning ``dtheta``.

    Returns an array of shape (2,) or (2, n).
    """
    d = np.asarray(d, dtype=float)
    th = np.asarray(dtheta, dtype=float)
    small = np.abs(th) < THETA_SMALL
    safe = np.where(small, 1.0, th)
    half = np.sin(0.5 * safe)
    # 1 - cos(a) written as 2 sin^2(a/2) to avoid cancellation near the branch
    exact_x = d * np.sin(safe) / safe
    exact_y = d * 2.0 * half * half / safe
    taylor_x = d * (1.0 - th * th / 6.0)
    taylor_y = d * th / 2.0
    return np.stack([np.where(small, taylor_x, exact_x), np.where(small, taylor_y, exact_y)])


def integrate(stream: SampleStream, model: WheelModel, bias_series=None,
              initial: Optional[Pose2] = None, forward_only: bool = False) -> Trajectory:
    """Dead-reckon the wheel pose at every encoder sample.

    ``bias_series`` is subtracted from the gyro rate at each sample before the
    trapezoid. With ``forward_only`` tick decrements count as forward travel.
    """
    t = stream.encoder.t
    n = len(t)
    omega = stream.gyro_on_encoder_grid.omega
    if len(omega) != n:
        raise LengthMismatch(f"gyro has {len(omega)} samples, encoder {n}")
    bias_series = np.zeros(n) if bias_series is None else np.asarray(bias_series, dtype=float)
    if bias_series.shape != (n,):
        raise LengthMismatch(f"bias series has {bias_series.shape} samples, encoder {n}")
    if initial is None:
        initial = Pose2(float(t[0]), 0.0, 0.0, 0.0)

    w = omega - bias_series
    dtheta = heading_increment(w[:-1], w[1:], np.diff(t))
    dticks = np.diff(stream.encoder.ticks)
    if forward_only:
        dticks = np.abs(dticks)
    d = model.metres_per_tick * dticks
    step = arc_displacement(d, dtheta)

    heading = np.empty(n)
    heading[0] = initial.yaw
    np.cumsum(dtheta, out=heading[1:])
    heading[1:] += initial.yaw
    c, s = np.cos(heading[:-1]), np.sin(heading[:-1])
    x = np.empty(n)
    y = np.empty(n)
    x[0], y[0] = initial.x, initial.y
    np.cumsum(c * step[0] - s * step[1], out=x[1:])
    np.cumsum(s * step[0] + c * step[1], out=y[1:])
    x[1:] += initial.x
    y[1:] += initial.y
    dist = np.concatenate([[0.0], np.cumsum(np.abs(d))])
    return Trajectory(t.copy(), x, y, wrap_angle(heading), dist)


def transform_trajectory(traj: Trajectory, pose: Pose2) -> Trajectory:
    """Left-multiply every pose by ``pose`` (a change of world frame)."""
    x, y, yaw = compose((pose.x, pose.y, pose.yaw), traj.poses)
    return Trajectory(traj.t, np.asarray(x), np.asarray(y), np.asarray(yaw), traj.distance)

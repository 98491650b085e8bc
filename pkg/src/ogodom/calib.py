"""Wheel radius and wheel-to-ground-truth extrinsics from velocity matching.

Ground-truth body velocity is predicted from the encoder as

    v_gt = R(theta_ext) [r * s, 0]^T + omega_gt * [-p_y, p_x]^T

where ``s`` is the encoder rate in radians of wheel rotation per second, so
``r * s`` is the wheel forward speed. The four parameters (r, p_x, p_y,
theta_ext) are fitted by Levenberg-Marquardt on the summed squared
velocity residuals of every usable sample of every sequence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    AllSamplesStatic,
    DegenerateGeometry,
    InvalidParameter,
    MalformedRow,
    MissingInput,
    NoConvergence,
    NoGroundTruth,
    NonPositiveRadius,
)
from .ingest import SampleStream
from .se2 import wrap_angle

log = logging.getLogger(__name__)

DEFAULT_RADIUS = 0.35
MIN_SPEED = 0.1
HUBER_DELTA = 0.1
# rms ground-truth yaw rate below which the lever arm is unobservable
MIN_TURN_RATE = 1e-4
WEAK_TURN_RATE = 0.02


@dataclass(frozen=True)
class CalibParams:
    radius: float = DEFAULT_RADIUS
    p_ext: tuple = (0.0, 0.0)
    theta_ext: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p_ext", (float(self.p_ext[0]), float(self.p_ext[1])))
        object.__setattr__(self, "theta_ext", wrap_angle(self.theta_ext))
        vals = [self.radius, *self.p_ext, self.theta_ext]
        if not np.all(np.isfinite(vals)):
            raise InvalidParameter(f"non-finite calibration {self}")
        if self.radius <= 0:
            raise InvalidParameter(f"radius must be positive, got {self.radius}")

    def as_vector(self) -> np.ndarray:
        return np.array([self.radius, self.p_ext[0], self.p_ext[1], self.theta_ext])

    @classmethod
    def from_vector(cls, v) -> CalibParams:
        return cls(float(v[0]), (float(v[1]), float(v[2])), float(v[3]))


@dataclass(frozen=True)
class CalibSamples:
    """Usable calibration rows, one per encoder interval."""
    vx: np.ndarray
    vy: np.ndarray
    omega: np.ndarray
    # wheel rotation rate (2 pi / N) * dticks / dt, rad/s
    rate: np.ndarray

    def __len__(self):
        return len(self.rate)


@dataclass
class SolveOptions:
    ticks_per_rev: int = 4096
    max_iter: int = 100
    min_speed: float = MIN_SPEED
    huber: bool = False
    huber_delta: float = HUBER_DELTA
    ftol: float = 1e-10
    xtol: float = 1e-12


@dataclass
class CalibReport:
    params: CalibParams
    rms_residual: float
    iterations: int
    converged: bool
    std_errors: np.ndarray
    n_samples: int
    warnings: list = field(default_factory=list)
    cost_history: list = field(default_factory=list)


def predict_gt_velocity(params: CalibParams, wheel_speed, omega_gt):
    c, s = np.cos(params.theta_ext), np.sin(params.theta_ext)
    px, py = params.p_ext
    wheel_speed = np.asarray(wheel_speed, dtype=float)
    omega_gt = np.asarray(omega_gt, dtype=float)
    return np.stack([c * wheel_speed - omega_gt * py, s * wheel_speed + omega_gt * px])


def wheel_rates(stream: SampleStream, ticks_per_rev: int) -> np.ndarray:
    """Forward-difference wheel rotation rate per interval (length n - 1)."""
    enc = stream.encoder
    return (2.0 * np.pi / ticks_per_rev) * np.diff(enc.ticks) / np.diff(enc.t)


def calibration_samples(streams, ticks_per_rev: int, radius: float,
                        min_speed: float = MIN_SPEED) -> CalibSamples:
    """Pair each encoder interval with the ground-truth velocity at its start.

    Intervals slower than ``min_speed`` (using ``radius``) or outside the
    ground-truth span are dropped.
    """
    if isinstance(streams, SampleStream):
        streams = [streams]
    parts = []
    for stream in streams:
        gt = stream.ground_truth
        if gt is None or not gt.has_velocity:
            raise NoGroundTruth("calibration needs ground-truth body velocities")
        rate = wheel_rates(stream, ticks_per_rev)
        vx, vy, om = gt.velocity_at(stream.t[:-1])
        keep = np.isfinite(vx) & (np.abs(radius * rate) >= min_speed)
        parts.append((vx[keep], vy[keep], om[keep], rate[keep]))
    out = CalibSamples(*(np.concatenate([p[k] for p in parts]) for k in range(4)))
    if len(out) == 0:
        raise AllSamplesStatic("no calibration sample above the minimum speed")
    return out


def residuals(x, data: CalibSamples) -> np.ndarray:
    """Interleaved [rx0, ry0, rx1, ry1, ...] for parameter vector x = (r, px, py, theta)."""
    r, px, py, th = x
    ws = r * data.rate
    out = np.empty(2 * len(data))
    out[0::2] = data.vx - (np.cos(th) * ws - data.omega * py)
    out[1::2] = data.vy - (np.sin(th) * ws + data.omega * px)
    return out


def jacobian(x, data: CalibSamples) -> np.ndarray:
    r, _, _, th = x
    c, s = np.cos(th), np.sin(th)
    n = len(data)
    J = np.zeros((2 * n, 4))
    J[0::2, 0] = -c * data.rate
    J[0::2, 2] = data.omega
    J[0::2, 3] = r * data.rate * s
    J[1::2, 0] = -s * data.rate
    J[1::2, 1] = -data.omega
    J[1::2, 3] = -r * data.rate * c
    return J


def build_residuals(streams, params: CalibParams, ticks_per_rev: int = 4096,
                    min_speed: float = MIN_SPEED) -> np.ndarray:
    data = calibration_samples(streams, ticks_per_rev, params.radius, min_speed)
    return residuals(params.as_vector(), data)


def _sample_norms(res):
    return np.hypot(res[0::2], res[1::2])


def _cost(res, huber_delta: Optional[float]) -> float:
    if huber_delta is None:
        return float(res @ res)
    e = _sample_norms(res)
    rho = np.where(e <= huber_delta, e * e, 2.0 * huber_delta * e - huber_delta**2)
    return float(rho.sum())


def _weights(res, huber_delta: Optional[float]):
    if huber_delta is None:
        return None
    e = _sample_norms(res)
    w = np.where(e <= huber_delta, 1.0, huber_delta / np.maximum(e, 1e-300))
    return np.repeat(w, 2)


def observability_warnings(data: CalibSamples) -> list:
    warnings = []
    turn = float(np.sqrt(np.mean(data.omega**2)))
    if turn < MIN_TURN_RATE:
        raise DegenerateGeometry(
            f"rms ground-truth yaw rate {turn:.2e} rad/s: lever arm unobservable without turning"
        )
    if turn < WEAK_TURN_RATE:
        warnings.append("weak_turning")
    if len(data) < 50:
        warnings.append("few_samples")
    if np.ptp(data.rate) < 1e-9:
        warnings.append("constant_speed")
    return warnings


def solve(streams, init: CalibParams = CalibParams(), options: SolveOptions = None) -> CalibReport:
    options = options or SolveOptions()
    data = calibration_samples(streams, options.ticks_per_rev, init.radius, options.min_speed)
    if 2 * len(data) < 4:
        raise AllSamplesStatic(f"need at least 2 moving samples, got {len(data)}")
    warnings = observability_warnings(data)
    delta = options.huber_delta if options.huber else None

    x = init.as_vector()
    res = residuals(x, data)
    cost = _cost(res, delta)
    history = [cost]
    J = jacobian(x, data)
    A = J.T @ J
    lam = 1e-3 * float(np.max(np.diag(A)))
    converged = False
    it = 0
    while it < options.max_iter:
        it += 1
        w = _weights(res, delta)
        Jw = J if w is None else J * w[:, None]
        A = J.T @ Jw
        g = Jw.T @ res
        damp = np.maximum(np.diag(A), 1e-12)
        try:
            step = np.linalg.solve(A + lam * np.diag(damp), g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        step = -step
        x_new = x + step
        res_new = residuals(x_new, data)
        cost_new = _cost(res_new, delta)
        step_norm = float(np.linalg.norm(step))
        if cost_new < cost:
            rel = (cost - cost_new) / cost
            assert cost_new <= history[-1]
            x, res, cost = x_new, res_new, cost_new
            history.append(cost)
            J = jacobian(x, data)
            lam = max(lam / 10.0, 1e-20)
            if rel < options.ftol or step_norm < options.xtol:
                converged = True
                break
        else:
            lam *= 10.0
            if step_norm < options.xtol or cost == 0.0 or lam > 1e30:
                converged = True
                break
        log.debug("lm iter %d cost %.6e lambda %.1e", it, cost, lam)

    if not converged:
        raise NoConvergence(f"Levenberg-Marquardt did not converge in {options.max_iter} iterations")
    if x[0] <= 0:
        raise NonPositiveRadius(f"solution radius {x[0]} m is not positive")

    m = len(res)
    sigma2 = float(res @ res) / max(m - 4, 1)
    A = J.T @ J
    try:
        cov = sigma2 * np.linalg.inv(A)
        std = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        std = np.full(4, np.nan)
    rms = float(np.sqrt(np.mean(_sample_norms(res) ** 2)))
    return CalibReport(CalibParams.from_vector(x), rms, it, True, std, len(data), warnings, history)


# ---------------------------------------------------------------------------
# calibration file

CALIB_KEYS = ("radius_m", "p_ext_x_m", "p_ext_y_m", "theta_ext_rad", "rms_residual_mps", "converged")


def write_calibration(path, report: CalibReport) -> None:
    p = report.params
    values = {
        "radius_m": repr(float(p.radius)),
        "p_ext_x_m": repr(p.p_ext[0]),
        "p_ext_y_m": repr(p.p_ext[1]),
        "theta_ext_rad": repr(float(p.theta_ext)),
        "rms_residual_mps": repr(float(report.rms_residual)),
        "converged": "true" if report.converged else "false",
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{k}={values[k]}\n" for k in CALIB_KEYS))


def write_params(path, params: CalibParams) -> None:
    """Calibration file for known parameters (zero residual, converged)."""
    write_calibration(path, CalibReport(params, 0.0, 0, True, np.zeros(4), 0))


def read_calibration(path) -> CalibParams:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"{path}: no such file")
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise MalformedRow(path, lineno, "expected key=value")
        k, v = (part.strip() for part in s.split("=", 1))
        values[k] = v
    missing = [k for k in CALIB_KEYS[:4] if k not in values]
    if missing:
        raise MalformedRow(path, -1, f"missing keys {missing}")
    try:
        return CalibParams(
            float(values["radius_m"]),
            (float(values["p_ext_x_m"]), float(values["p_ext_y_m"])),
            float(values["theta_ext_rad"]),
        )
    except ValueError as exc:
        raise MalformedRow(path, -1, str(exc)) from None


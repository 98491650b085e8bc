"""Kinematic vehicle simulator with encoder, gyro and ground-truth outputs.

A script is a list of segments driven back to back. Within a segment the
wheel-centre forward speed and any injected slip are constant; the yaw rate
follows the commanded value under a yaw-acceleration limit, so it is
piecewise linear with knots on sample times. Each segment is sampled on its
own uniform grid whose end points coincide with the segment boundaries.

The ground-truth body frame sits at ``-p_ext`` from the wheel centre so that
its velocity obeys the linkage used by :mod:`ogodom.calib` exactly:

    v_gt = R(theta_ext) [u, -lateral_slip]^T + omega * [-p_y, p_x]^T

Forward slip adds to the rate the encoder sees; lateral slip moves the wheel
sideways, which the encoder cannot observe.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .calib import CalibParams
from .errors import InvalidScript, MissingInput, UnknownPreset
from .ingest import MEASURED, EncoderLog, GroundTruth, GyroLog, SampleStream
from .odometry import Trajectory, WheelModel
from .se2 import wrap_angle

DEFAULT_RATE = 100.0
DEFAULT_YAW_ACCEL = 1.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class Straight:
    speed: float
    duration: float


@dataclass(frozen=True)
class Arc:
    speed: float
    yaw_rate: float
    duration: float


@dataclass(frozen=True)
class Stop:
    duration: float


@dataclass(frozen=True)
class SlipBurst:
    """Keeps the previous segment's motion and adds slip on top."""
    duration: float
    forward_slip: float
    lateral_slip: float


Segment = Union[Straight, Arc, Stop, SlipBurst]


@dataclass(frozen=True)
class ManeuverScript:
    segments: tuple
    sample_rate: float = DEFAULT_RATE
    seed: int = 0
    yaw_accel: float = DEFAULT_YAW_ACCEL

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        validate_script(self)

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))


@dataclass(frozen=True)
class NoiseSpec:
    gyro_noise_std: float = 0.0
    gyro_bias_init: float = 0.0
    # linear bias drift, rad/s per second
    gyro_bias_drift: float = 0.0
    # random-walk density, rad/s per sqrt(s)
    gyro_bias_walk: float = 0.0
    gt_velocity_noise_std: float = 0.0
    wheel: WheelModel = WheelModel(0.30, 4096)
    extrinsics: CalibParams = CalibParams(0.30, (0.0, 0.0), 0.0)

    def __post_init__(self):
        for name in ("gyro_noise_std", "gyro_bias_drift", "gyro_bias_walk", "gt_velocity_noise_std"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidScript(f"{name} must be finite and >= 0, got {v}")
        if not np.isfinite(self.gyro_bias_init):
            raise InvalidScript("gyro_bias_init must be finite")

    @property
    def true_params(self) -> CalibParams:
        return CalibParams(self.wheel.radius, self.extrinsics.p_ext, self.extrinsics.theta_ext)


@dataclass
class SimResult:
    stream: SampleStream
    true_bias: np.ndarray
    # (n, 3): t, forward slip, lateral slip
    true_slip: np.ndarray
    wheel_path: Trajectory
    params: CalibParams = field(default_factory=CalibParams)

    def __iter__(self):
        return iter((self.stream, self.true_bias, self.true_slip))


def validate_script(script: ManeuverScript) -> None:
    if not script.segments:
        raise InvalidScript("script has no segments")
    if not (np.isfinite(script.sample_rate) and script.sample_rate >= 10.0):
        raise InvalidScript(f"sample rate must be >= 10 Hz, got {script.sample_rate}")
    if not script.yaw_accel > 0:
        raise InvalidScript(f"yaw_accel must be > 0, got {script.yaw_accel}")
    for k, seg in enumerate(script.segments):
        vals = [getattr(seg, f) for f in seg.__dataclass_fields__]
        if not np.all(np.isfinite(vals)):
            raise InvalidScript(f"segment {k}: non-finite value in {seg}")
        if seg.duration <= 0:
            raise InvalidScript(f"segment {k}: duration must be > 0")
        if seg.duration * script.sample_rate < 0.5:
            raise InvalidScript(f"segment {k}: shorter than half a sample period")
        if getattr(seg, "speed", 0.0) < 0:
            raise InvalidScript(f"segment {k}: speed must be >= 0")


# ---------------------------------------------------------------------------
# script schedule


def _schedule(script: ManeuverScript):
    """Per-interval arrays: t (n+1,), and dt, speed, commanded yaw rate, slips (n,)."""
    times, dts, speed, cmd, fwd, lat = [], [], [], [], [], []
    start = 0.0
    cur_speed, cur_cmd = 0.0, 0.0
    for seg in script.segments:
        n = max(1, int(round(seg.duration * script.sample_rate)))
        end = start + seg.duration
        grid = np.linspace(start, end, n + 1)
        times.append(grid[:-1])
        dts.append(np.diff(grid))
        f = l = 0.0
        if isinstance(seg, Straight):
            cur_speed, cur_cmd = seg.speed, 0.0
        elif isinstance(seg, Arc):
            cur_speed, cur_cmd = seg.speed, seg.yaw_rate
        elif isinstance(seg, Stop):
            cur_speed, cur_cmd = 0.0, 0.0
        else:
            f, l = seg.forward_slip, seg.lateral_slip
        speed.append(np.full(n, cur_speed))
        cmd.append(np.full(n, cur_cmd))
        fwd.append(np.full(n, f))
        lat.append(np.full(n, l))
        start = end
    t = np.concatenate(times + [[start]])
    cat = np.concatenate
    return t, cat(dts), cat(speed), cat(cmd), cat(fwd), cat(lat)


def _yaw_rate_profile(cmd, dt, accel):
    """Rate-limited tracking of the commanded yaw rate, sampled at the knots."""
    w = np.empty(len(cmd) + 1)
    w[0] = cmd[0]
    cur = cmd[0]
    for k in range(len(cmd)):
        lim = accel * dt[k]
        cur = cur + min(max(cmd[k] - cur, -lim), lim)
        w[k + 1] = cur
    return w


def _wheel_increments(theta, omega, dt, heading_offset, vx, vy):
    """World displacement of the wheel centre over each interval.

    ``vx``/``vy`` are wheel-frame velocities, constant per interval; the
    wheel heading is ``theta + heading_offset`` with theta quadratic in time.
    """
    n = len(dt)
    out_x = np.empty(n)
    out_y = np.empty(n)
    w0, w1 = omega[:-1], omega[1:]
    const = w0 == w1

    # constant yaw rate: closed form
    phi = w0[const] * dt[const]
    sinc = np.sinc(phi / np.pi)
    versc = 0.5 * phi * np.sinc(phi / (2.0 * np.pi)) ** 2  # (1 - cos phi) / phi
    bx = (sinc * vx[const] - versc * vy[const]) * dt[const]
    by = (versc * vx[const] + sinc * vy[const]) * dt[const]
    h = theta[:-1][const] + heading_offset
    out_x[const] = np.cos(h) * bx - np.sin(h) * by
    out_y[const] = np.sin(h) * bx + np.cos(h) * by

    # linearly varying yaw rate: Gauss-Legendre quadrature
    ramp = ~const
    if ramp.any():
        d = dt[ramp][:, None]
        tau = 0.5 * d * (1.0 + _GL_X[None, :])
        acc = ((w1 - w0)[ramp] / dt[ramp])[:, None]
        h = theta[:-1][ramp][:, None] + heading_offset + w0[ramp][:, None] * tau + 0.5 * acc * tau**2
        c, s = np.cos(h), np.sin(h)
        wts = 0.5 * d * _GL_W[None, :]
        ux, uy = vx[ramp][:, None], vy[ramp][:, None]
        out_x[ramp] = np.sum(wts * (c * ux - s * uy), axis=1)
        out_y[ramp] = np.sum(wts * (s * ux + c * uy), axis=1)
    return out_x, out_y


def simulate(script: ManeuverScript, noise: NoiseSpec = NoiseSpec()) -> SimResult:
    validate_script(script)
    rng = np.random.default_rng(script.seed)
    t, dt, speed, cmd, fwd, lat = _schedule(script)
    n = len(t)
    omega = _yaw_rate_profile(cmd, dt, script.yaw_accel)

    theta = np.empty(n)
    theta[0] = 0.0
    np.cumsum(0.5 * (omega[:-1] + omega[1:]) * dt, out=theta[1:])

    p = np.array(noise.extrinsics.p_ext)
    th_e = noise.extrinsics.theta_ext
    # wheel-frame velocity; lateral slip is encoder-minus-truth, hence the sign
    dwx, dwy = _wheel_increments(theta, omega, dt, th_e, speed, -lat)
    wx = np.empty(n)
    wy = np.empty(n)
    wx[0], wy[0] = -p[0], -p[1]
    np.cumsum(dwx, out=wx[1:])
    np.cumsum(dwy, out=wy[1:])
    wx[1:] -= p[0]
    wy[1:] -= p[1]
    c, s = np.cos(theta), np.sin(theta)
    gx = wx + c * p[0] - s * p[1]
    gy = wy + s * p[0] + c * p[1]

    # per-sample values take the interval that starts at the sample
    def at_samples(a):
        return np.append(a, a[-1])

    u_s, lat_s, fwd_s = at_samples(speed), at_samples(lat), at_samples(fwd)
    ce, se = np.cos(th_e), np.sin(th_e)
    vx = ce * u_s + se * lat_s - omega * p[1]
    vy = se * u_s - ce * lat_s + omega * p[0]

    travel = np.empty(n)
    travel[0] = 0.0
    np.cumsum((speed + fwd) * dt, out=travel[1:])
    ticks = np.floor(travel / noise.wheel.metres_per_tick).astype(np.int64)

    bias = noise.gyro_bias_init + noise.gyro_bias_drift * t
    if noise.gyro_bias_walk > 0:
        steps = rng.standard_normal(n - 1) * noise.gyro_bias_walk * np.sqrt(dt)
        bias = bias + np.concatenate([[0.0], np.cumsum(steps)])
    gyro = omega + bias
    if noise.gyro_noise_std > 0:
        gyro = gyro + rng.standard_normal(n) * noise.gyro_noise_std
    if noise.gt_velocity_noise_std > 0:
        vx = vx + rng.standard_normal(n) * noise.gt_velocity_noise_std
        vy = vy + rng.standard_normal(n) * noise.gt_velocity_noise_std

    gt = GroundTruth(t, gx, gy, wrap_angle(theta), vx, vy, omega.copy(), MEASURED)
    signed = bool(np.any(np.diff(ticks) < 0))
    stream = SampleStream(EncoderLog(t, ticks, signed=signed), GyroLog(t, gyro), gt)
    slip = np.column_stack([t, fwd_s, lat_s])
    wheel = Trajectory(t, wx, wy, wrap_angle(theta + th_e))
    return SimResult(stream, bias, slip, wheel, noise.true_params)


# ---------------------------------------------------------------------------
# presets


def _campus_loop(speed=6.4):
    half_turn = np.pi / 10.0  # 180 degrees in 10 s
    bend = 0.2
    return [
        Straight(speed, 20.0),
        Arc(speed, bend, 5.0),
        Arc(speed, -bend, 5.0),
        Straight(speed, 30.0),
        Arc(speed, half_turn, 10.0),
        Straight(speed, 60.0),
        Arc(speed, half_turn, 10.0),
    ]


def no_slip_loop(seed: int = 0) -> ManeuverScript:
    segs = [Stop(3.0)]
    for _ in range(3):
        segs += _campus_loop()
    segs += [Straight(6.4, 2.0), Stop(3.0)]
    return ManeuverScript(tuple(segs), DEFAULT_RATE, seed)


def stop_and_go(seed: int = 0, n_stops: int = 5, stop_s: float = 3.0) -> ManeuverScript:
    segs = [Stop(stop_s)]
    for k in range(n_stops - 1):
        segs += [
            Straight(5.0, 15.0),
            Arc(5.0, 0.25 if k % 2 == 0 else -0.25, 8.0),
            Straight(5.0, 10.0),
            Stop(stop_s),
        ]
    return ManeuverScript(tuple(segs), DEFAULT_RATE, seed)


# burst profile of the drift loop: (duration s, relative lateral magnitude)
_DRIFT_BURSTS = ((0.5, 3.0), (0.5, 4.0), (1.0, 5.0), (1.0, 6.0), (1.0, 7.0), (1.5, 7.0))
# handbrake slides lock the encoder wheel: forward slip opposes motion
_FORWARD_RATIO = -0.67
MAX_DRIFT_LATERAL = 7.0


def drift_loop(seed: int = 0, side_rms: Optional[float] = None) -> ManeuverScript:
    """Campus loop with slip bursts in the half turns.

    Lateral burst magnitudes peak at 7 m/s; with ``side_rms`` they are
    rescaled so the per-sample RMS lateral slip equals that value.
    """
    def build(scale):
        segs = [Stop(3.0)]
        bursts = iter(_DRIFT_BURSTS)
        for _ in range(3):
            for seg in _campus_loop():
                if isinstance(seg, Arc) and seg.yaw_rate > 0.25:
                    dur, mag = next(bursts)
                    half = 0.5 * (seg.duration - dur)
                    lat = scale * mag
                    segs += [Arc(seg.speed, seg.yaw_rate, half),
                             SlipBurst(dur, _FORWARD_RATIO * lat, lat),
                             Arc(seg.speed, seg.yaw_rate, half)]
                else:
                    segs.append(seg)
        segs += [Straight(6.4, 2.0), Stop(3.0)]
        return ManeuverScript(tuple(segs), DEFAULT_RATE, seed)

    script = build(1.0)
    if side_rms is None:
        return script
    return build(side_rms / scripted_side_rms(script))


def suburbs_like(seed: int = 0) -> ManeuverScript:
    segs = [Stop(3.0)]
    for k in range(6):
        sign = 1.0 if k % 2 == 0 else -1.0
        segs += [
            Straight(11.0, 40.0),
            Arc(8.0, sign * 0.05, 20.0),
            Straight(13.0, 25.0),
            Arc(6.0, sign * 0.3, 5.0),
            Straight(9.0, 15.0),
            SlipBurst(1.0, -0.05, 0.1 * sign),
            Straight(9.0, 10.0),
            Stop(4.0),
        ]
    return ManeuverScript(tuple(segs), DEFAULT_RATE, seed)


_RICH_PATTERN = (
    Arc(4.0, 0.4, 4.0),
    Straight(7.0, 3.0),
    Arc(6.0, -0.3, 5.0),
    Arc(3.0, 0.6, 3.0),
    Straight(5.0, 2.0),
    Arc(8.0, -0.15, 4.0),
)


def rich_turning(seed: int = 0, n_samples: int = 10000, rate: float = DEFAULT_RATE) -> ManeuverScript:
    """Calibration drive: alternating turns and speeds, exactly ``n_samples`` long."""
    total = (n_samples - 1) / rate
    segs = [Stop(1.0)]
    elapsed = 1.0
    k = 0
    while elapsed < total - 1e-9:
        seg = _RICH_PATTERN[k % len(_RICH_PATTERN)]
        d = min(seg.duration, total - elapsed)
        segs.append(replace(seg, duration=d))
        elapsed += d
        k += 1
    return ManeuverScript(tuple(segs), rate, seed)


PRESETS = {
    "no_slip_loop": no_slip_loop,
    "stop_and_go": stop_and_go,
    "drift_loop": drift_loop,
    "suburbs_like": suburbs_like,
}


def preset(name: str, seed: int = 0) -> ManeuverScript:
    try:
        return PRESETS[name](seed=seed)
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def scripted_side_rms(script: ManeuverScript) -> float:
    """RMS lateral slip over the samples the script will produce."""
    _, _, _, _, _, lat = _schedule(script)
    lat = np.append(lat, lat[-1])
    return float(np.sqrt(np.mean(lat**2)))


# ---------------------------------------------------------------------------
# script file


def format_script(script: ManeuverScript) -> str:
    lines = [f"#rate={script.sample_rate!r}", f"#seed={script.seed}", f"#yaw_accel={script.yaw_accel!r}"]
    for seg in script.segments:
        if isinstance(seg, Straight):
            lines.append(f"straight,{seg.speed!r},{seg.duration!r}")
        elif isinstance(seg, Arc):
            lines.append(f"arc,{seg.speed!r},{seg.yaw_rate!r},{seg.duration!r}")
        elif isinstance(seg, Stop):
            lines.append(f"stop,{seg.duration!r}")
        else:
            lines.append(f"slip,{seg.duration!r},{seg.forward_slip!r},{seg.lateral_slip!r}")
    return "\n".join(lines) + "\n"


_SEGMENT_TYPES = {"straight": (Straight, 2), "arc": (Arc, 3), "stop": (Stop, 1), "slip": (SlipBurst, 3)}


def parse_script(text: str, seed: Optional[int] = None) -> ManeuverScript:
    meta = {"rate": DEFAULT_RATE, "seed": 0, "yaw_accel": DEFAULT_YAW_ACCEL}
    segs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if "=" in body:
                k, v = (x.strip() for x in body.split("=", 1))
                if k in meta:
                    try:
                        meta[k] = int(v) if k == "seed" else float(v)
                    except ValueError:
                        raise InvalidScript(f"line {lineno}: bad header value {v!r}") from None
            continue
        kind, *fields = (f.strip() for f in s.split(","))
        if kind not in _SEGMENT_TYPES:
            raise InvalidScript(f"line {lineno}: unknown segment {kind!r}")
        cls, arity = _SEGMENT_TYPES[kind]
        if len(fields) != arity:
            raise InvalidScript(f"line {lineno}: {kind} takes {arity} values, got {len(fields)}")
        try:
            segs.append(cls(*(float(f) for f in fields)))
        except ValueError:
            raise InvalidScript(f"line {lineno}: non-numeric value") from None
    return ManeuverScript(tuple(segs), meta["rate"], meta["seed"] if seed is None else seed,
                          meta["yaw_accel"])


def read_script(path, seed: Optional[int] = None) -> ManeuverScript:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"{path}: no such file")
    return parse_script(path.read_text(encoding="utf-8"), seed)


def write_script(path, script: ManeuverScript) -> None:
    Path(path).write_text(format_script(script), encoding="utf-8")

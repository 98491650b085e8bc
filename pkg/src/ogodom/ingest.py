"""CSV ingestion, validation and gyro-to-encoder alignment.

Sensor data is held column-wise in numpy arrays. The per-row ``*Sample``
tuples exist for indexing convenience only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import polars as pl

from .errors import (
    EmptyFile,
    InsufficientData,
    MalformedRow,
    MissingInput,
    NonMonotonicTime,
    OutOfRange,
    SpanMismatch,
)
from .se2 import wrap_angle

ENCODER_COLUMNS = ("t", "ticks")
GYRO_COLUMNS = ("t", "omega")
GT_POSE_COLUMNS = ("t", "x", "y", "yaw")
GT_VEL_COLUMNS = ("vx", "vy", "omega")
TRAJECTORY_COLUMNS = ("t", "x", "y", "yaw")

MAX_GYRO_RATE = 20.0

MEASURED = "measured"
DIFFERENTIATED = "differentiated"


class EncoderSample(NamedTuple):
    t: float
    ticks: int


class GyroSample(NamedTuple):
    t: float
    omega: float


class GroundTruthSample(NamedTuple):
    t: float
    x: float
    y: float
    yaw: float
    vx: float
    vy: float
    omega: float
    velocity_source: str


@dataclass(frozen=True)
class EncoderLog:
    t: np.ndarray
    ticks: np.ndarray
    # reverse driving (decreasing ticks) only allowed when declared
    signed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "t", np.ascontiguousarray(self.t, dtype=np.float64))
        object.__setattr__(self, "ticks", np.ascontiguousarray(self.ticks, dtype=np.int64))

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> EncoderSample:
        return EncoderSample(float(self.t[i]), int(self.ticks[i]))


@dataclass(frozen=True)
class GyroLog:
    t: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", np.ascontiguousarray(self.t, dtype=np.float64))
        object.__setattr__(self, "omega", np.ascontiguousarray(self.omega, dtype=np.float64))

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> GyroSample:
        return GyroSample(float(self.t[i]), float(self.omega[i]))


@dataclass(frozen=True)
class GroundTruth:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray
    vx: Optional[np.ndarray] = None
    vy: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    velocity_source: Optional[str] = None

    def __post_init__(self):
        for name in ("t", "x", "y", "yaw", "vx", "vy", "omega"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.ascontiguousarray(v, dtype=np.float64))
        object.__setattr__(self, "yaw", np.asarray(wrap_angle(self.yaw), dtype=np.float64))
        if self.has_velocity and self.velocity_source is None:
            object.__setattr__(self, "velocity_source", MEASURED)

    @property
    def has_velocity(self) -> bool:
        return self.vx is not None and self.vy is not None and self.omega is not None

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> GroundTruthSample:
        nan = float("nan")
        vel = (
            (float(self.vx[i]), float(self.vy[i]), float(self.omega[i]))
            if self.has_velocity
            else (nan, nan, nan)
        )
        return GroundTruthSample(
            float(self.t[i]), float(self.x[i]), float(self.y[i]), float(self.yaw[i]),
            *vel, self.velocity_source or "",
        )

    def without_velocity(self) -> GroundTruth:
        return GroundTruth(self.t, self.x, self.y, self.yaw)

    def velocity_at(self, times):
        """Body-frame (vx, vy, omega) linearly interpolated at ``times``; NaN outside the span."""
        times = np.asarray(times, dtype=float)
        nan = np.nan
        return tuple(
            np.interp(times, self.t, v, left=nan, right=nan) for v in (self.vx, self.vy, self.omega)
        )

    def pose_at(self, times):
        """(x, y, yaw) at ``times``; yaw interpolated along the shortest arc."""
        times = np.asarray(times, dtype=float)
        x = np.interp(times, self.t, self.x)
        y = np.interp(times, self.t, self.y)
        yaw = wrap_angle(np.interp(times, self.t, np.unwrap(self.yaw)))
        return x, y, yaw


@dataclass(frozen=True)
class SampleStream:
    encoder: EncoderLog
    gyro_on_encoder_grid: GyroLog
    ground_truth: Optional[GroundTruth] = None

    def __len__(self):
        return len(self.encoder)

    @property
    def t(self) -> np.ndarray:
        return self.encoder.t


# ---------------------------------------------------------------------------
# CSV reading


@dataclass
class _RawTable:
    columns: tuple
    data: dict
    meta: dict = field(default_factory=dict)


def _header(path: Path):
    """Return (meta dict from '#key=value' lines, header columns)."""
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                body = s[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            return meta, tuple(c.strip() for c in s.split(","))
    raise EmptyFile(f"{path}: no header row")


def _data_lines(path: Path):
    """Yield (line_number, fields) for data rows, skipping header and comments."""
    seen_header = False
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if not seen_header:
                seen_header = True
                continue
            yield lineno, next(csv.reader([s]))


def _line_of_row(path: Path, row: int) -> int:
    for k, (lineno, _) in enumerate(_data_lines(path)):
        if k == row:
            return lineno
    return -1


def _locate_bad_row(path: Path, columns, int_columns) -> MalformedRow:
    for lineno, fields in _data_lines(path):
        if len(fields) != len(columns):
            return MalformedRow(path, lineno, f"expected {len(columns)} fields, got {len(fields)}")
        for name, value in zip(columns, fields):
            try:
                int(value) if name in int_columns else float(value)
            except ValueError:
                return MalformedRow(path, lineno, f"bad value {value!r} in column {name!r}")
    return None


def _read_table(path, allowed_headers, int_columns=()) -> _RawTable:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"{path}: no such file")
    meta, columns = _header(path)
    if columns not in allowed_headers:
        raise MalformedRow(path, _header_line(path), f"header {','.join(columns)!r} not recognised")
    schema = {c: (pl.Int64 if c in int_columns else pl.Float64) for c in columns}
    try:
        df = pl.read_csv(path, comment_prefix="#", schema=schema, has_header=True)
    except Exception:
        raise (_locate_bad_row(path, columns, int_columns)
               or MalformedRow(path, -1, "unparseable file")) from None
    if df.null_count().sum_horizontal().item() > 0:
        bad = _locate_bad_row(path, columns, int_columns)
        if bad is not None:
            raise bad
        # blank lines between data rows come back as all-null rows
        df = df.drop_nulls()
    if df.height == 0:
        raise EmptyFile(f"{path}: no data rows")
    data = {c: df[c].to_numpy() for c in columns}
    for c in columns:
        if c in int_columns:
            continue
        bad = ~np.isfinite(data[c])
        if bad.any():
            row = int(np.argmax(bad))
            raise MalformedRow(path, _line_of_row(path, row), f"non-finite value in column {c!r}")
    return _RawTable(columns, data, meta)


def _header_line(path: Path) -> int:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if s and not s.startswith("#"):
                return lineno
    return -1


def _check_increasing(t, path) -> None:
    dt = np.diff(t)
    bad = np.flatnonzero(dt <= 0)
    if bad.size:
        row = int(bad[0]) + 1
        where = f"{path}:{_line_of_row(Path(path), row)}" if path else f"index {row}"
        kind = "duplicate" if dt[bad[0]] == 0 else "decreasing"
        raise NonMonotonicTime(f"{where}: {kind} timestamp {t[row]!r}")


def parse_encoder_csv(path) -> EncoderLog:
    tab = _read_table(path, {ENCODER_COLUMNS}, int_columns={"ticks"})
    t, ticks = tab.data["t"], tab.data["ticks"]
    _check_increasing(t, path)
    signed = tab.meta.get("direction", "").lower() == "signed"
    if not signed:
        dec = np.flatnonzero(np.diff(ticks) < 0)
        if dec.size:
            row = int(dec[0]) + 1
            raise MalformedRow(
                path, _line_of_row(Path(path), row),
                "ticks decrease but file does not declare '#direction=signed'",
            )
    return EncoderLog(t, ticks, signed=signed)


def parse_gyro_csv(path, max_rate: float = MAX_GYRO_RATE) -> GyroLog:
    tab = _read_table(path, {GYRO_COLUMNS})
    t, omega = tab.data["t"], tab.data["omega"]
    _check_increasing(t, path)
    over = np.flatnonzero(np.abs(omega) >= max_rate)
    if over.size:
        row = int(over[0])
        raise MalformedRow(
            path, _line_of_row(Path(path), row), f"|omega| {omega[row]} exceeds {max_rate} rad/s"
        )
    return GyroLog(t, omega)


def parse_ground_truth_csv(path) -> GroundTruth:
    tab = _read_table(path, {GT_POSE_COLUMNS, GT_POSE_COLUMNS + GT_VEL_COLUMNS})
    d = tab.data
    _check_increasing(d["t"], path)
    if "vx" in d:
        source = tab.meta.get("velocity_source", MEASURED)
        return GroundTruth(d["t"], d["x"], d["y"], d["yaw"], d["vx"], d["vy"], d["omega"], source)
    return GroundTruth(d["t"], d["x"], d["y"], d["yaw"])


def parse_trajectory_csv(path):
    from .odometry import Trajectory

    tab = _read_table(path, {TRAJECTORY_COLUMNS})
    d = tab.data
    _check_increasing(d["t"], path)
    return Trajectory(d["t"], d["x"], d["y"], d["yaw"])


# ---------------------------------------------------------------------------
# CSV writing


def write_csv(path, frame: dict, meta: Optional[dict] = None) -> None:
    """Write named columns with an optional block of '#key=value' header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"#{k}={v}\n".encode())
        pl.DataFrame(frame).write_csv(fh)


def write_encoder_csv(path, log: EncoderLog) -> None:
    write_csv(path, {"t": log.t, "ticks": log.ticks}, {"direction": "signed"} if log.signed else None)


def write_gyro_csv(path, log: GyroLog) -> None:
    write_csv(path, {"t": log.t, "omega": log.omega})


def write_ground_truth_csv(path, gt: GroundTruth) -> None:
    frame = {"t": gt.t, "x": gt.x, "y": gt.y, "yaw": gt.yaw}
    meta = None
    if gt.has_velocity:
        frame.update(vx=gt.vx, vy=gt.vy, omega=gt.omega)
        meta = {"velocity_source": gt.velocity_source}
    write_csv(path, frame, meta)


def write_trajectory_csv(path, traj) -> None:
    write_csv(path, {"t": traj.t, "x": traj.x, "y": traj.y, "yaw": traj.yaw})


# ---------------------------------------------------------------------------
# alignment


def resample_gyro(gyro: GyroLog, target_times) -> GyroLog:
    """Linearly interpolate the gyro rate at ``target_times``; no extrapolation."""
    if len(gyro) < 2:
        raise InsufficientData(f"need at least 2 gyro samples, got {len(gyro)}")
    target = np.asarray(target_times, dtype=float)
    if target.size and (target.min() < gyro.t[0] or target.max() > gyro.t[-1]):
        raise OutOfRange(
            f"target times [{target.min()}, {target.max()}] outside gyro span "
            f"[{gyro.t[0]}, {gyro.t[-1]}]"
        )
    return GyroLog(target, np.interp(target, gyro.t, gyro.omega))


def differentiate_ground_truth(gt: GroundTruth) -> GroundTruth:
    """Body-frame velocities from poses: central differences, one-sided at the ends."""
    if len(gt) < 2:
        raise InsufficientData("need at least 2 ground-truth poses to differentiate")
    xdot = np.gradient(gt.x, gt.t)
    ydot = np.gradient(gt.y, gt.t)
    omega = np.gradient(np.unwrap(gt.yaw), gt.t)
    c, s = np.cos(gt.yaw), np.sin(gt.yaw)
    vx = c * xdot + s * ydot
    vy = -s * xdot + c * ydot
    return GroundTruth(gt.t, gt.x, gt.y, gt.yaw, vx, vy, omega, DIFFERENTIATED)


def build_stream(encoder: EncoderLog, gyro: GyroLog, ground_truth: Optional[GroundTruth] = None,
                 differentiate: bool = True) -> SampleStream:
    if len(encoder) == 0:
        raise InsufficientData("encoder log is empty")
    if len(gyro) < 2:
        raise InsufficientData(f"need at least 2 gyro samples, got {len(gyro)}")
    if encoder.t[0] < gyro.t[0] or encoder.t[-1] > gyro.t[-1]:
        raise SpanMismatch(
            f"encoder span [{encoder.t[0]}, {encoder.t[-1]}] not covered by gyro span "
            f"[{gyro.t[0]}, {gyro.t[-1]}]"
        )
    gyro_grid = resample_gyro(gyro, encoder.t)
    if ground_truth is not None and not ground_truth.has_velocity and differentiate:
        ground_truth = differentiate_ground_truth(ground_truth)
    return SampleStream(encoder, gyro_grid, ground_truth)


def load_stream(encoder_path, gyro_path, gt_path=None, differentiate: bool = True) -> SampleStream:
    gt = parse_ground_truth_csv(gt_path) if gt_path else None
    return build_stream(parse_encoder_csv(encoder_path), parse_gyro_csv(gyro_path), gt, differentiate)

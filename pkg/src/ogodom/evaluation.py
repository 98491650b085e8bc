"""Relative-pose scoring (KITTI convention, in SE(2)) and wheel-slip statistics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calib import CalibParams, wheel_rates
from .errors import InsufficientData, InsufficientOverlap, NoGroundTruth, TrajectoryTooShort
from .ingest import GroundTruth, SampleStream
from .odometry import Trajectory
from .se2 import between, compose, inverse

DEFAULT_LENGTHS = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)


@dataclass(frozen=True)
class PosePairs:
    t: np.ndarray
    est: tuple
    gt: tuple

    def __len__(self):
        return len(self.t)


@dataclass
class EvalReport:
    trans_err_pct: float
    rot_err_deg_per_100m: float
    # (length_m, trans_err_pct, rot_err_deg_per_100m, count)
    per_segment: list
    segment_lengths: tuple
    # (m, 4): start index, nominal length, trans %, rot deg/100 m
    instances: np.ndarray


@dataclass
class SlipReport:
    rms_forward_slip: float
    rms_side_slip: float
    # (n, 3): t, forward, lateral
    per_sample_slip: np.ndarray


def align_to_gt(est: Trajectory, gt: GroundTruth, extrinsics: CalibParams,
                anchor: bool = True, min_overlap: float = 0.9) -> PosePairs:
    """Express wheel poses as ground-truth body poses and pair them with GT.

    GT is interpolated at the estimate timestamps. With ``anchor`` the
    estimate is moved rigidly so its first pose matches GT.
    """
    inside = (est.t >= gt.t[0]) & (est.t <= gt.t[-1])
    if len(est) == 0 or inside.mean() < min_overlap:
        frac = inside.mean() if len(est) else 0.0
        raise InsufficientOverlap(f"only {100 * frac:.1f}% of the estimate overlaps ground truth")
    t = est.t[inside]
    gt_pose = gt.pose_at(t)
    # the GT body origin sits at -p_ext from the wheel centre, rotated by -theta_ext
    wheel_to_body = inverse((-extrinsics.p_ext[0], -extrinsics.p_ext[1], extrinsics.theta_ext))
    body = compose((est.x[inside], est.y[inside], est.yaw[inside]), wheel_to_body)
    if anchor:
        first_body = tuple(np.asarray(c)[0] for c in body)
        first_gt = tuple(np.asarray(c)[0] for c in gt_pose)
        body = compose(compose(first_gt, inverse(first_body)), body)
    return PosePairs(t, tuple(np.asarray(c) for c in body), tuple(np.asarray(c) for c in gt_pose))


def _path_distance(x, y):
    return np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])


def _segment_errors(pairs: PosePairs, dist, starts, length):
    """Errors of every segment of nominal ``length`` starting at ``starts``."""
    ends = np.searchsorted(dist, dist[starts] + length, side="left")
    ok = ends < len(dist)
    i, j = starts[ok], ends[ok]
    if i.size == 0:
        return i, np.empty(0), np.empty(0)
    span = dist[j] - dist[i]
    take = lambda pose, idx: tuple(c[idx] for c in pose)  # noqa: E731
    d_gt = between(take(pairs.gt, i), take(pairs.gt, j))
    d_est = between(take(pairs.est, i), take(pairs.est, j))
    ex, ey, eyaw = between(d_gt, d_est)
    trans = np.hypot(ex, ey) / span * 100.0
    rot = np.degrees(np.abs(eyaw)) / span * 100.0
    return i, trans, rot


def _instances(pairs: PosePairs, lengths, stride: int, threads: int) -> np.ndarray:
    if len(pairs) < 2:
        raise InsufficientData(f"need at least 2 pose pairs, got {len(pairs)}")
    dist = _path_distance(pairs.gt[0], pairs.gt[1])
    starts = np.arange(0, len(pairs), max(1, int(stride)))
    chunks = np.array_split(starts, max(1, int(threads))) if threads > 1 else [starts]

    def work(chunk):
        rows = []
        for length in lengths:
            i, trans, rot = _segment_errors(pairs, dist, chunk, length)
            rows.append(np.column_stack([i, np.full(i.size, length), trans, rot]))
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(starts)]
    # order: by length, then by start; independent of the chunking
    by_length = [np.concatenate([res[k] for res in results]) for k in range(len(lengths))]
    return np.concatenate(by_length) if by_length else np.empty((0, 4))


def kitti_metrics(pairs: PosePairs, segment_lengths=DEFAULT_LENGTHS, stride: int = 1,
                  threads: int = 1) -> EvalReport:
    lengths = tuple(float(v) for v in segment_lengths)
    inst = _instances(pairs, lengths, stride, threads)
    if len(inst) == 0:
        raise TrajectoryTooShort("no evaluation segment fits in the ground-truth path")
    per_segment = []
    for length in lengths:
        rows = inst[inst[:, 1] == length]
        if len(rows):
            per_segment.append((length, float(rows[:, 2].mean()), float(rows[:, 3].mean()), len(rows)))
        else:
            per_segment.append((length, float("nan"), float("nan"), 0))
    return EvalReport(float(inst[:, 2].mean()), float(inst[:, 3].mean()), per_segment, lengths, inst)


def error_vs_distance(pairs: PosePairs, window_lengths=DEFAULT_LENGTHS, stride: int = 1) -> np.ndarray:
    """Per-start-frame translation error, rows of (start_distance, length, trans_err_pct)."""
    lengths = tuple(float(v) for v in window_lengths)
    if not lengths:
        return np.empty((0, 3))
    inst = _instances(pairs, lengths, stride, 1)
    if len(inst) == 0:
        raise TrajectoryTooShort("no evaluation segment fits in the ground-truth path")
    dist = _path_distance(pairs.gt[0], pairs.gt[1])
    return np.column_stack([dist[inst[:, 0].astype(int)], inst[:, 1], inst[:, 2]])


def slip_profile(stream: SampleStream, params: CalibParams, ticks_per_rev: int = 4096,
                 min_speed: float = 0.0) -> SlipReport:
    """Encoder forward speed minus GT velocity projected into the wheel frame.

    Each sample uses the encoder interval that starts at it (the last sample
    reuses the final interval). Samples whose GT speed is below ``min_speed``
    are dropped.
    """
    gt = stream.ground_truth
    if gt is None or not gt.has_velocity:
        raise NoGroundTruth("slip analysis needs ground-truth body velocities")
    if len(stream) < 2:
        raise InsufficientData("need at least 2 encoder samples")
    rate = wheel_rates(stream, ticks_per_rev)
    enc_speed = params.radius * np.append(rate, rate[-1])
    vx, vy, om = gt.velocity_at(stream.t)
    px, py = params.p_ext
    ax = vx + om * py
    ay = vy - om * px
    c, s = np.cos(params.theta_ext), np.sin(params.theta_ext)
    wheel_x = c * ax + s * ay
    wheel_y = -s * ax + c * ay
    keep = np.isfinite(vx)
    if min_speed > 0:
        keep &= np.hypot(vx, vy) >= min_speed
    fwd = (enc_speed - wheel_x)[keep]
    lat = (-wheel_y)[keep]
    table = np.column_stack([stream.t[keep], fwd, lat])
    rms = lambda a: float(np.sqrt(np.mean(a * a))) if a.size else float("nan")  # noqa: E731
    return SlipReport(rms(fwd), rms(lat), table)


# ---------------------------------------------------------------------------
# report files


def write_eval_report(path, report: EvalReport) -> None:
    lines = ["length_m,trans_err_pct,rot_err_deg_per_100m,count"]
    for length, trans, rot, count in report.per_segment:
        lines.append(f"{length!r},{trans!r},{rot!r},{count}")
    lines.append(f"# aggregate={report.trans_err_pct:.2f},{report.rot_err_deg_per_100m:.2f}")
    lines.append(f"# aggregate_full={report.trans_err_pct!r},{report.rot_err_deg_per_100m!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_slip_report(path, report: SlipReport) -> None:
    rows = report.per_sample_slip
    lines = ["t,forward_slip_mps,lateral_slip_mps"]
    lines.extend(f"{t!r},{f!r},{l!r}" for t, f, l in rows.tolist())
    lines.append(f"# rms_forward={report.rms_forward_slip!r}")
    lines.append(f"# rms_side={report.rms_side_slip!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_error_table(path, table: np.ndarray) -> None:
    lines = ["start_distance_m,length_m,trans_err_pct"]
    lines.extend(f"{d!r},{l!r},{e!r}" for d, l, e in table.tolist())
    Path(path).write_text("\n".join(lines) + "\n")

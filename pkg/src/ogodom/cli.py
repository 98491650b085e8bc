"""Batch command-line front end.

Exit codes: 0 success, 1 internal error, 2 input error, 3 degenerate data.
Errors are reported on stderr as ``error: <ErrorName>: <message>``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bias import BiasConfig, bias_series
from .calib import (
    DEFAULT_RADIUS,
    CalibParams,
    SolveOptions,
    read_calibration,
    solve,
    write_calibration,
    write_params,
)
from .errors import InvalidParameter, MalformedRow, MissingInput, OdomError
from .evaluation import (
    DEFAULT_LENGTHS,
    align_to_gt,
    error_vs_distance,
    kitti_metrics,
    slip_profile,
    write_error_table,
    write_eval_report,
    write_slip_report,
)
from .ingest import (
    load_stream,
    write_csv,
    parse_ground_truth_csv,
    parse_trajectory_csv,
    write_encoder_csv,
    write_ground_truth_csv,
    write_gyro_csv,
    write_trajectory_csv,
)
from .odometry import WheelModel, integrate
from .synth import NoiseSpec, drift_loop, preset, read_script, simulate, write_script

# a radar frame in the reference timing comparison spans 250 ms
FRAME_SPAN_S = 0.25
SIM_RADIUS = 0.30


@dataclass
class RunConfig:
    encoder: list = field(default_factory=list)
    gyro: list = field(default_factory=list)
    gt: list = field(default_factory=list)
    calib: Optional[str] = None
    traj: Optional[str] = None
    out: str = "out"
    threads: int = 1
    # overrides a script's own seed when given
    seed: Optional[int] = None
    # nominal radius; the simulator uses it as the true radius
    radius: Optional[float] = None
    ticks_per_rev: int = 4096
    forward_only: bool = False
    bias: BiasConfig = field(default_factory=BiasConfig)
    segment_lengths: tuple = DEFAULT_LENGTHS
    stride: int = 1
    slip_min_speed: float = 0.0
    huber: bool = False
    max_iter: int = 100
    calib_min_speed: float = 0.1
    noise: dict = field(default_factory=dict)
    drift_side_rms: Optional[float] = None

    def as_dict(self) -> dict:
        d = asdict(self)
        d["segment_lengths"] = list(self.segment_lengths)
        return d


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.exists() or path.is_dir():
        raise MissingInput(f"{path}: no such config file")
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise MalformedRow(path, lineno, "expected key = value")
        k, v = (p.strip() for p in s.split("=", 1))
        out[k] = v
    return out


def _bool(v) -> bool:
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _lengths(v) -> tuple:
    return tuple(float(x) for x in str(v).split(",") if x.strip())


_KEYS = {
    "wheel.radius": ("radius", float),
    "wheel.ticks_per_rev": ("ticks_per_rev", int),
    "run.forward_only": ("forward_only", _bool),
    "eval.segment_lengths": ("segment_lengths", _lengths),
    "eval.stride": ("stride", int),
    "slip.min_speed": ("slip_min_speed", float),
    "calib.huber": ("huber", _bool),
    "calib.max_iter": ("max_iter", int),
    "calib.min_speed": ("calib_min_speed", float),
    "sim.drift_side_rms": ("drift_side_rms", float),
}
_BIAS_KEYS = {
    "bias.alpha": ("alpha", float),
    "bias.static_window_s": ("static_window_s", float),
    "bias.static_tick_tol": ("static_tick_tol", int),
    "bias.initial": ("initial", float),
}
_NOISE_KEYS = {
    "noise.gyro_std": ("gyro_noise_std", float),
    "noise.gyro_bias_init": ("gyro_bias_init", float),
    "noise.gyro_bias_drift": ("gyro_bias_drift", float),
    "noise.gyro_bias_walk": ("gyro_bias_walk", float),
    "noise.gt_velocity_std": ("gt_velocity_noise_std", float),
    "extrinsics.p_x": ("p_x", float),
    "extrinsics.p_y": ("p_y", float),
    "extrinsics.theta": ("theta", float),
}


def build_config(args) -> RunConfig:
    cfg = RunConfig()
    bias_kw = {}
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key, raw in values.items():
        try:
            if key in _KEYS:
                attr, conv = _KEYS[key]
                setattr(cfg, attr, conv(raw))
            elif key in _BIAS_KEYS:
                attr, conv = _BIAS_KEYS[key]
                bias_kw[attr] = conv(raw)
            elif key in _NOISE_KEYS:
                attr, conv = _NOISE_KEYS[key]
                cfg.noise[attr] = conv(raw)
            else:
                raise InvalidParameter(f"unknown config key {key!r}")
        except ValueError:
            raise InvalidParameter(f"bad value {raw!r} for {key}") from None
    cfg.bias = BiasConfig(**bias_kw)

    # flags override the file
    for name in ("encoder", "gyro", "gt"):
        v = getattr(args, name, None)
        if v:
            setattr(cfg, name, list(v))
    for name in ("calib", "traj", "out", "threads", "seed", "radius", "ticks_per_rev", "stride"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "lengths", None):
        cfg.segment_lengths = _lengths(args.lengths)
    if getattr(args, "forward_only", False):
        cfg.forward_only = True
    if getattr(args, "huber", False):
        cfg.huber = True
    if cfg.threads < 1:
        raise InvalidParameter("--threads must be >= 1")
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _require(paths, what: str) -> None:
    if not paths:
        raise MissingInput(f"no {what} file given")
    for p in paths:
        if not Path(p).is_file():
            raise MissingInput(f"{what} file {p} does not exist")


def write_manifest(out: Path, command: str, cfg: RunConfig, inputs: dict, outputs: list) -> None:
    config = cfg.as_dict()
    # execution knobs, not inputs to any result
    config.pop("out")
    config.pop("threads")
    blob = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "tool": "ogodom",
        "version": __version__,
        "command": command,
        "inputs": {k: {"path": str(v), "sha256": _sha256(v)} for k, v in inputs.items()},
        "config": json.loads(blob),
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "outputs": sorted(outputs),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _params(cfg: RunConfig) -> CalibParams:
    if cfg.calib:
        return read_calibration(cfg.calib)
    return CalibParams(cfg.radius or DEFAULT_RADIUS)


def _trajectory(cfg: RunConfig, params: CalibParams):
    _require(cfg.encoder, "encoder")
    _require(cfg.gyro, "gyro")
    stream = load_stream(cfg.encoder[0], cfg.gyro[0])
    model = WheelModel(params.radius, cfg.ticks_per_rev)
    bias = bias_series(stream, cfg.bias)
    return stream, integrate(stream, model, bias, forward_only=cfg.forward_only)


# ---------------------------------------------------------------------------
# commands


def cmd_run(cfg: RunConfig) -> int:
    _require(cfg.encoder, "encoder")
    _require(cfg.gyro, "gyro")
    if cfg.calib:
        _require([cfg.calib], "calibration")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    params = _params(cfg)
    t_load = time.perf_counter()
    stream = load_stream(cfg.encoder[0], cfg.gyro[0])
    t_int = time.perf_counter()
    model = WheelModel(params.radius, cfg.ticks_per_rev)
    bias = bias_series(stream, cfg.bias)
    traj = integrate(stream, model, bias, forward_only=cfg.forward_only)
    t_done = time.perf_counter()
    write_trajectory_csv(out / "trajectory.csv", traj)
    inputs = {"encoder": cfg.encoder[0], "gyro": cfg.gyro[0]}
    if cfg.calib:
        inputs["calib"] = cfg.calib
    write_manifest(out, "run", cfg, inputs, ["trajectory.csv"])
    t_end = time.perf_counter()

    n = len(traj)
    per_sample = (t_done - t_int) / max(n, 1)
    duration = float(stream.t[-1] - stream.t[0])
    frames = max(duration / FRAME_SPAN_S, 1.0)
    travelled = float(np.abs(np.diff(stream.encoder.ticks)).sum() * model.metres_per_tick)
    print(f"samples={n}")
    print(f"path_length_m={travelled:.3f}")
    print(f"# timing load_s={t_int - t_load:.4f} integrate_s={t_done - t_int:.4f} "
          f"wall_s={t_end - t0:.4f}")
    print(f"# timing per_sample_us={per_sample * 1e6:.4f} "
          f"per_frame_ms={(t_done - t_int) / frames * 1e3:.6f}")
    return 0


def _streams(cfg: RunConfig):
    _require(cfg.encoder, "encoder")
    _require(cfg.gyro, "gyro")
    _require(cfg.gt, "ground-truth")
    if not len(cfg.encoder) == len(cfg.gyro) == len(cfg.gt):
        raise InvalidParameter("give one --encoder, --gyro and --gt per sequence")
    return [load_stream(e, g, t) for e, g, t in zip(cfg.encoder, cfg.gyro, cfg.gt)]


def cmd_calibrate(cfg: RunConfig) -> int:
    streams = _streams(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    options = SolveOptions(ticks_per_rev=cfg.ticks_per_rev, max_iter=cfg.max_iter,
                           min_speed=cfg.calib_min_speed, huber=cfg.huber)
    report = solve(streams, CalibParams(cfg.radius or DEFAULT_RADIUS), options)
    write_calibration(out / "calibration.txt", report)
    inputs = {}
    for k, (e, g, t) in enumerate(zip(cfg.encoder, cfg.gyro, cfg.gt)):
        inputs.update({f"encoder_{k}": e, f"gyro_{k}": g, f"gt_{k}": t})
    write_manifest(out, "calibrate", cfg, inputs, ["calibration.txt"])
    p = report.params
    print(f"radius_m={p.radius!r}")
    print(f"p_ext_m={p.p_ext[0]!r},{p.p_ext[1]!r}")
    print(f"theta_ext_rad={p.theta_ext!r}")
    print(f"rms_residual_mps={report.rms_residual!r}")
    print(f"iterations={report.iterations}")
    print(f"std_errors={','.join(repr(float(s)) for s in report.std_errors)}")
    for w in report.warnings:
        print(f"warning={w}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    _require(cfg.gt, "ground-truth")
    params = _params(cfg)
    inputs = {"gt": cfg.gt[0]}
    if cfg.traj:
        _require([cfg.traj], "trajectory")
        traj = parse_trajectory_csv(cfg.traj)
        inputs["traj"] = cfg.traj
    else:
        _, traj = _trajectory(cfg, params)
        inputs.update(encoder=cfg.encoder[0], gyro=cfg.gyro[0])
    if cfg.calib:
        inputs["calib"] = cfg.calib
    gt = parse_ground_truth_csv(cfg.gt[0])
    pairs = align_to_gt(traj, gt, params)
    report = kitti_metrics(pairs, cfg.segment_lengths, cfg.stride, cfg.threads)
    table = error_vs_distance(pairs, cfg.segment_lengths, cfg.stride)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_eval_report(out / "eval.csv", report)
    write_error_table(out / "error_vs_distance.csv", table)
    write_manifest(out, "eval", cfg, inputs, ["eval.csv", "error_vs_distance.csv"])
    for length, trans, rot, count in report.per_segment:
        print(f"{length:g},{trans:.4f},{rot:.4f},{count}")
    print(f"aggregate={report.trans_err_pct:.2f},{report.rot_err_deg_per_100m:.2f}")
    return 0


def cmd_slip(cfg: RunConfig) -> int:
    _require(cfg.encoder, "encoder")
    _require(cfg.gyro, "gyro")
    _require(cfg.gt, "ground-truth")
    params = _params(cfg)
    stream = load_stream(cfg.encoder[0], cfg.gyro[0], cfg.gt[0])
    report = slip_profile(stream, params, cfg.ticks_per_rev, cfg.slip_min_speed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_slip_report(out / "slip.csv", report)
    inputs = {"encoder": cfg.encoder[0], "gyro": cfg.gyro[0], "gt": cfg.gt[0]}
    if cfg.calib:
        inputs["calib"] = cfg.calib
    write_manifest(out, "slip", cfg, inputs, ["slip.csv"])
    print(f"# rms_forward={report.rms_forward_slip:.6f}")
    print(f"# rms_side={report.rms_side_slip:.6f}")
    return 0


def cmd_simulate(cfg: RunConfig, script_path: Optional[str], preset_name: Optional[str]) -> int:
    if script_path:
        script = read_script(script_path, seed=cfg.seed)
    elif preset_name == "drift_loop" and cfg.drift_side_rms is not None:
        script = drift_loop(seed=cfg.seed or 0, side_rms=cfg.drift_side_rms)
    elif preset_name:
        script = preset(preset_name, seed=cfg.seed or 0)
    else:
        raise MissingInput("give --script or --preset")
    n = dict(cfg.noise)
    radius = cfg.radius or SIM_RADIUS
    ext = CalibParams(radius, (n.pop("p_x", 0.0), n.pop("p_y", 0.0)), n.pop("theta", 0.0))
    noise = NoiseSpec(wheel=WheelModel(radius, cfg.ticks_per_rev), extrinsics=ext, **n)
    res = simulate(script, noise)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    s = res.stream
    write_encoder_csv(out / "encoder.csv", s.encoder)
    write_gyro_csv(out / "gyro.csv", s.gyro_on_encoder_grid)
    write_ground_truth_csv(out / "gt.csv", s.ground_truth)
    write_csv(out / "true_bias.csv", {"t": s.t, "bias": res.true_bias})
    slip = res.true_slip
    write_csv(out / "true_slip.csv",
              {"t": slip[:, 0], "forward_slip_mps": slip[:, 1], "lateral_slip_mps": slip[:, 2]})
    write_params(out / "truth_calib.txt", res.params)
    write_script(out / "script.txt", script)
    inputs = {"script": script_path} if script_path else {}
    outputs = ["encoder.csv", "gyro.csv", "gt.csv", "true_bias.csv", "true_slip.csv",
               "truth_calib.txt", "script.txt"]
    write_manifest(out, "simulate", cfg, inputs, outputs)
    print(f"samples={len(s)}")
    print(f"duration_s={script.duration:.3f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--encoder", action="append", help="encoder CSV (t,ticks); repeatable")
    shared.add_argument("--gyro", action="append", help="gyro CSV (t,omega); repeatable")
    shared.add_argument("--gt", action="append", help="ground-truth CSV; repeatable")
    shared.add_argument("--calib", help="calibration key-value file")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--config", help="key = value config file (flags override it)")
    shared.add_argument("--threads", type=int)
    shared.add_argument("--seed", type=int)
    shared.add_argument("--radius", type=float, help="nominal wheel radius, m")
    shared.add_argument("--ticks-per-rev", type=int, dest="ticks_per_rev")

    p = argparse.ArgumentParser(prog="ogodom", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ogodom {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[shared], help="dead-reckon a trajectory")
    run.add_argument("--forward-only", action="store_true")

    cal = sub.add_parser("calibrate", parents=[shared], help="estimate radius and extrinsics")
    cal.add_argument("--huber", action="store_true")

    ev = sub.add_parser("eval", parents=[shared], help="KITTI relative errors")
    ev.add_argument("--traj", help="trajectory CSV (t,x,y,yaw); otherwise integrate --encoder/--gyro")
    ev.add_argument("--lengths", help="comma-separated segment lengths, m")
    ev.add_argument("--stride", type=int)

    sub.add_parser("slip", parents=[shared], help="forward and lateral slip profile")

    sim = sub.add_parser("simulate", parents=[shared], help="generate a synthetic dataset")
    src = sim.add_mutually_exclusive_group()
    src.add_argument("--script", help="maneuver script file")
    src.add_argument("--preset", help="no_slip_loop | stop_and_go | drift_loop | suburbs_like")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "slip":
            return cmd_slip(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.script, args.preset)
    except OdomError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        print(f"error: InternalError: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Time dead reckoning over a synthetic log of a given size."""

import argparse
import time

import numpy as np

from ogodom.ingest import EncoderLog, GyroLog, SampleStream
from ogodom.odometry import WheelModel, integrate

FRAME_S = 0.25  # one radar frame


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=1_000_000, help="samples")
    ap.add_argument("--rate", type=float, default=100.0, help="Hz")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    t = np.arange(args.n) / args.rate
    ticks = np.cumsum(rng.integers(0, 40, args.n))
    omega = 0.3 * np.sin(t / 20.0) + rng.normal(0, 0.01, args.n)
    stream = SampleStream(EncoderLog(t, ticks), GyroLog(t, omega))
    model = WheelModel(0.30, 4096)
    bias = np.full(args.n, 1e-3)

    times = []
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        integrate(stream, model, bias)
        times.append(time.perf_counter() - t0)
    best = min(times)
    frames = t[-1] / FRAME_S
    print(f"samples={args.n} best_s={best:.4f} median_s={np.median(times):.4f}")
    print(f"per_sample_us={best / args.n * 1e6:.4f} per_frame_ms={best / frames * 1e3:.6f}")


if __name__ == "__main__":
    main()

"""Gyro bias from static intervals.

The bias is observed whenever the encoder reports no motion: the first static
window initialises the estimate with the mean gyro rate, and every later
window nudges it through a first-order low-pass filter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InvalidParameter, NoStaticWindow, NotInitialized, WindowTooShort
from .ingest import SampleStream

# absorbs float error in window durations, e.g. t[200] - t[0] = 1.9999999999999998
_DURATION_EPS = 1e-9


@dataclass(frozen=True)
class BiasConfig:
    alpha: float = 0.5
    static_window_s: float = 2.0
    static_tick_tol: int = 0
    # used only when the stream contains no static window
    initial: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise InvalidParameter(f"bias.alpha must be in [0, 1), got {self.alpha}")
        if self.static_window_s <= 0:
            raise InvalidParameter(f"bias.static_window_s must be > 0, got {self.static_window_s}")
        if self.static_tick_tol < 0:
            raise InvalidParameter(f"bias.static_tick_tol must be >= 0, got {self.static_tick_tol}")


@dataclass(frozen=True)
class BiasState:
    estimate: float = 0.0
    initialized: bool = False
    alpha: float = 0.5
    static_window: float = 2.0
    static_tick_tol: int = 0

    @classmethod
    def from_config(cls, config: BiasConfig) -> BiasState:
        return cls(alpha=config.alpha, static_window=config.static_window_s,
                   static_tick_tol=config.static_tick_tol)


def detect_static_windows(stream: SampleStream, window: float = 2.0, tick_tol: int = 0):
    """Maximal runs of samples with |tick delta| <= tick_tol lasting at least ``window`` s.

    Returns inclusive (start_index, end_index) pairs in time order.
    """
    t = stream.encoder.t
    still = np.abs(np.diff(stream.encoder.ticks)) <= tick_tol
    edges = np.diff(np.concatenate([[0], still.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    # a run of still steps k0..k1 spans samples k0..k1+1
    ends = np.flatnonzero(edges == -1)
    out = []
    for s, e in zip(starts, ends):
        if t[e] - t[s] >= window - _DURATION_EPS:
            out.append((int(s), int(e)))
    return out


def initialize_bias(stream: SampleStream, window_bounds, min_duration: float = 2.0) -> float:
    start, end = window_bounds
    t = stream.encoder.t
    if end <= start or t[end] - t[start] < min_duration - _DURATION_EPS:
        raise WindowTooShort(f"static window {window_bounds} shorter than {min_duration} s")
    return float(np.mean(stream.gyro_on_encoder_grid.omega[start:end + 1]))


def update_bias(state: BiasState, window_mean: float) -> BiasState:
    if not state.initialized:
        raise NotInitialized("bias must be initialised before it can be updated")
    a = state.alpha
    return replace(state, estimate=a * state.estimate + (1.0 - a) * window_mean)


def bias_series(stream: SampleStream, config: BiasConfig = BiasConfig()):
    """Per-sample bias estimate, piecewise constant between static windows.

    The value changes at the last sample of each static window. Samples before
    the first window carry the first estimate.
    """
    n = len(stream)
    windows = detect_static_windows(stream, config.static_window_s, config.static_tick_tol)
    if not windows:
        if config.initial is None:
            raise NoStaticWindow("no static window found and no bias.initial configured")
        return np.full(n, float(config.initial))

    state = BiasState.from_config(config)
    series = np.empty(n)
    for k, bounds in enumerate(windows):
        mean = initialize_bias(stream, bounds, config.static_window_s)
        if k == 0:
            state = replace(state, estimate=mean, initialized=True)
            series[:] = mean
        else:
            state = update_bias(state, mean)
            series[bounds[1]:] = state.estimate
    return series

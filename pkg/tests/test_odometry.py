import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import TRUE_EXT, make_stream
from ogodom.errors import InvalidParameter, LengthMismatch, NonPositiveDt
from ogodom.odometry import (
    THETA_SMALL,
    Pose2,
    WheelModel,
    arc_displacement,
    heading_increment,
    integrate,
    tick_distance,
    transform_trajectory,
)
from ogodom.se2 import angle_diff, between, compose
from ogodom.synth import Arc, ManeuverScript, Straight, Stop, simulate


def test_tick_distance_examples():
    assert math.isclose(tick_distance(WheelModel(0.5, 100), 0, 100), math.pi, rel_tol=1e-15)
    assert tick_distance(WheelModel(0.5, 100), 7, 7) == 0.0
    assert math.isclose(tick_distance(WheelModel(0.3, 4096), 0, 1), 4.6019423e-4, rel_tol=1e-7)
    assert tick_distance(WheelModel(0.3, 4096), 10, 0) < 0


def test_wheel_model_bounds():
    with pytest.raises(InvalidParameter):
        WheelModel(0.05, 100)
    with pytest.raises(InvalidParameter):
        WheelModel(2.0, 100)
    with pytest.raises(InvalidParameter):
        WheelModel(0.3, 0)
    assert WheelModel(0.3, 1).metres_per_tick == pytest.approx(2 * math.pi * 0.3)


def test_pose_validation():
    assert Pose2(0.0, 0.0, 0.0, 3 * math.pi).yaw == pytest.approx(math.pi)
    with pytest.raises(InvalidParameter):
        Pose2(0.0, float("nan"), 0.0, 0.0)


def test_heading_increment_examples():
    assert heading_increment(0.1, 0.1, 1.0) == pytest.approx(0.1, abs=1e-16)
    assert heading_increment(0.0, 0.2, 1.0) == pytest.approx(0.1, abs=1e-16)
    with pytest.raises(NonPositiveDt):
        heading_increment(0.0, 0.0, 0.0)
    with pytest.raises(NonPositiveDt):
        heading_increment(0.0, 0.0, -1e-3)


def test_heading_increment_ramp():
    # omega(t) = 0.3 + 1.7 t is linear, so the trapezoid is exact
    t = np.linspace(0.0, 1.0, 1001)
    w = 0.3 + 1.7 * t
    total = heading_increment(w[:-1], w[1:], np.diff(t)).sum()
    assert abs(total - (0.3 + 1.7 / 2)) < 1e-9


def test_arc_displacement_examples():
    assert np.array_equal(arc_displacement(1.0, 0.0), [1.0, 0.0])
    q = arc_displacement(1.0, math.pi / 2)
    assert np.allclose(q, [2 / math.pi, 2 / math.pi], rtol=1e-15)
    assert np.allclose(q, [0.63662, 0.63662], atol=1e-5)


@pytest.mark.parametrize("lo,hi", [(THETA_SMALL * 0.999999, THETA_SMALL * 1.000001),
                                   (1e-7, THETA_SMALL * 1.01)])
def test_arc_branch_continuity(lo, hi):
    # y grows linearly with the angle, so compare y / angle across the branch
    a = arc_displacement(1.0, lo)
    b = arc_displacement(1.0, hi)
    assert abs(a[0] - b[0]) / b[0] < 1e-12
    assert abs(a[1] / lo - b[1] / hi) / 0.5 < 1e-12
    a = arc_displacement(1.0, -lo)
    b = arc_displacement(1.0, -hi)
    assert abs(a[1] / lo - b[1] / hi) / 0.5 < 1e-12


@given(st.floats(-10, 10, allow_nan=False), st.floats(-3, 3, allow_nan=False))
def test_arc_displacement_matches_integral(d, th):
    # chord of an arc of length d turning th: integrate the heading numerically
    s = np.linspace(0.0, 1.0, 4001)
    h = th * s
    ref = np.array([np.trapezoid(np.cos(h), s), np.trapezoid(np.sin(h), s)]) * d
    got = arc_displacement(d, th)
    assert np.allclose(got, ref, atol=1e-6 * max(1.0, abs(d)))
    assert math.isclose(np.hypot(*got), abs(d) * abs(np.sinc(th / (2 * np.pi))), abs_tol=1e-12)


def test_straight_line():
    t = np.arange(101) * 0.01
    ticks = np.arange(101) * 37
    traj = integrate(make_stream(t, ticks, np.zeros(101)), WheelModel(0.3, 4096))
    assert len(traj) == 101
    assert traj[0] == Pose2(0.0, 0.0, 0.0, 0.0)
    assert traj.x[-1] == pytest.approx(2 * math.pi * 0.3 * 3700 / 4096, rel=1e-14)
    assert np.all(traj.y == 0.0) and np.all(traj.yaw == 0.0)
    assert traj.path_length() == pytest.approx(traj.x[-1], rel=1e-14)


def test_circle_closes():
    # integer ticks per step so the wheel speed is exact: v = 32 ticks per 10 ms
    model = WheelModel(0.3, 4096)
    v = 32 * model.metres_per_tick / 0.01
    radius = 12.0
    omega = v / radius
    period = 2 * math.pi / omega
    n = int(round(period * 100))
    t = np.arange(n + 1) * (period / n)
    ticks = np.round(np.arange(n + 1) * v * period / n / model.metres_per_tick).astype(np.int64)
    traj = integrate(make_stream(t, ticks, np.full(n + 1, omega)), model)
    travelled = ticks[-1] * model.metres_per_tick
    # ticks are rounded, so close over the arc actually travelled
    gap = math.hypot(traj.x[-1], traj.y[-1])
    expected_gap = 2 * radius * abs(math.sin(0.5 * (travelled / radius - omega * t[-1])))
    assert abs(gap - expected_gap) < 1e-6 * 2 * math.pi * radius
    assert abs(angle_diff(traj.yaw[-1], 0.0)) < 1e-9


def test_synthetic_roundtrip(loop_sim):
    s = loop_sim.stream
    model = WheelModel(0.30, 4096)
    traj = integrate(s, model, loop_sim.true_bias)
    w = loop_sim.wheel_path
    rel = between((w.x[0], w.y[0], w.yaw[0]), (w.x[-1], w.y[-1], w.yaw[-1]))
    err = math.hypot(traj.x[-1] - rel[0], traj.y[-1] - rel[1])
    # 0.005 % of the path length
    assert err < 5e-5 * traj.path_length()


@pytest.mark.parametrize("shape", [
    (Straight(6.0, 4.0), Arc(5.0, 0.4, 6.0), Stop(1.0), Arc(3.0, -0.8, 5.0)),
    (Arc(10.0, 0.05, 20.0), Straight(12.0, 5.0), Arc(2.0, 1.2, 4.0)),
])
def test_synthetic_shapes(shape):
    res = simulate(ManeuverScript(shape, 100.0))
    traj = integrate(res.stream, WheelModel(0.30, 4096))
    w = res.wheel_path
    rel = between((w.x[0], w.y[0], w.yaw[0]), (w.x, w.y, w.yaw))
    err = np.hypot(traj.x - rel[0], traj.y - rel[1])
    assert err[-1] < 5e-5 * traj.path_length()
    assert np.max(np.abs(angle_diff(traj.yaw, rel[2]))) < 1e-12


def test_length_mismatch():
    s = make_stream([0.0, 0.1, 0.2], [0, 1, 2], [0.0, 0.0, 0.0])
    with pytest.raises(LengthMismatch):
        integrate(s, WheelModel(0.3, 100), np.zeros(2))


def test_bias_subtracted_at_both_ends():
    s = make_stream([0.0, 1.0], [0, 0], [0.1, 0.3])
    traj = integrate(s, WheelModel(0.3, 100), np.array([0.1, 0.1]))
    assert traj.yaw[-1] == pytest.approx(0.1, abs=1e-16)


def test_reverse_and_forward_only():
    s = make_stream([0.0, 1.0, 2.0], [0, -100, -200], [0.0, 0.0, 0.0], signed=True)
    back = integrate(s, WheelModel(0.5, 100))
    fwd = integrate(s, WheelModel(0.5, 100), forward_only=True)
    assert back.x[-1] == pytest.approx(-2 * math.pi)
    assert fwd.x[-1] == pytest.approx(2 * math.pi)


def random_stream(rng, n):
    t = np.cumsum(rng.uniform(0.005, 0.02, n))
    ticks = np.concatenate([[0], np.cumsum(rng.integers(0, 60, n - 1))])
    omega = rng.uniform(-1.5, 1.5, n)
    return make_stream(t, ticks, omega)


@given(st.integers(0, 2**32 - 1), st.floats(-50, 50), st.floats(-50, 50), st.floats(-4, 4))
def test_left_invariance(seed, x0, y0, yaw0):
    s = random_stream(np.random.default_rng(seed), 300)
    model = WheelModel(0.3, 1024)
    start = Pose2(float(s.t[0]), x0, y0, yaw0)
    a = transform_trajectory(integrate(s, model), start)
    b = integrate(s, model, initial=start)
    assert np.allclose(a.x, b.x, atol=1e-9) and np.allclose(a.y, b.y, atol=1e-9)
    assert np.max(np.abs(angle_diff(a.yaw, b.yaw))) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_reversibility(seed):
    rng = np.random.default_rng(seed)
    n = 10_000
    # a dyadic step keeps the time grid exact, so both halves see identical dt
    dt = np.full(n - 1, 1 / 128)
    dticks = rng.integers(0, 60, n - 1)
    omega = np.cumsum(rng.normal(0, 0.02, n))
    # the turnaround sample is shared by both halves, so it must not turn
    omega[-1] = 0.0
    t = np.concatenate([[0.0], np.cumsum(np.concatenate([dt, dt]))])
    ticks = np.concatenate([[0], np.cumsum(np.concatenate([dticks, -dticks[::-1]]))])
    om = np.concatenate([omega, -omega[::-1][1:]])
    traj = integrate(make_stream(t, ticks, om, signed=True), WheelModel(0.3, 1024))
    assert math.hypot(traj.x[-1], traj.y[-1]) < 1e-9
    assert abs(traj.yaw[-1]) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_path_length_is_travelled_distance(seed):
    s = random_stream(np.random.default_rng(seed), 200)
    model = WheelModel(0.3, 1024)
    traj = integrate(s, model)
    d = np.abs(np.diff(s.encoder.ticks)) * model.metres_per_tick
    assert traj.path_length() == pytest.approx(d.sum(), rel=1e-12)


def test_chord_length_curved():
    # chords under-read a constant-turn arc by sinc(a / 2) per step
    n = 1001
    t = np.arange(n) * 0.01
    ticks = np.arange(n) * 40
    model = WheelModel(0.3, 1024)
    arc = 40 * (n - 1) * model.metres_per_tick
    traj = integrate(make_stream(t, ticks, np.full(n, 0.4)), model)
    assert abs(traj.chord_length() - arc) / arc < 1e-6
    assert traj.chord_length() == pytest.approx(arc * np.sinc(0.002 / np.pi), rel=1e-12)
    assert traj.path_length() == pytest.approx(arc, rel=1e-13)
    straight = integrate(make_stream(t, ticks, np.zeros(n)), model)
    assert straight.chord_length() == pytest.approx(arc, rel=1e-13)


@given(
    hnp.arrays(np.int64, 50, elements=st.integers(-10**6, 10**6)),
    hnp.arrays(np.float64, 50, elements=st.floats(-19.9, 19.9, allow_nan=False)),
    hnp.arrays(np.float64, 49, elements=st.floats(1e-6, 10.0)),
)
def test_fuzz_finite(ticks, omega, dt):
    t = np.concatenate([[0.0], np.cumsum(dt)])
    traj = integrate(make_stream(t, np.cumsum(ticks), omega, signed=True), WheelModel(1.9, 1))
    assert np.all(np.isfinite(traj.x)) and np.all(np.isfinite(traj.y))
    assert np.all((traj.yaw > -np.pi) & (traj.yaw <= np.pi))


def test_wheel_pose_to_body_extrinsics(fine_loop_sim):
    # the wheel path maps onto GT through the extrinsics exactly
    w = fine_loop_sim.wheel_path
    gt = fine_loop_sim.stream.ground_truth
    px, py = TRUE_EXT.p_ext
    from ogodom.se2 import inverse
    bx, by, byaw = compose((w.x, w.y, w.yaw), inverse((-px, -py, TRUE_EXT.theta_ext)))
    assert np.max(np.hypot(bx - gt.x, by - gt.y)) < 1e-9
    assert np.max(np.abs(angle_diff(byaw, gt.yaw))) < 1e-12

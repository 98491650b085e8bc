import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ogodom.errors import (
    EmptyFile,
    InsufficientData,
    MalformedRow,
    MissingInput,
    NonMonotonicTime,
    OutOfRange,
    SpanMismatch,
)
from ogodom.ingest import (
    DIFFERENTIATED,
    MEASURED,
    EncoderLog,
    GyroLog,
    build_stream,
    parse_encoder_csv,
    parse_ground_truth_csv,
    parse_gyro_csv,
    resample_gyro,
    write_encoder_csv,
    write_ground_truth_csv,
    write_gyro_csv,
)
from ogodom.synth import Arc, ManeuverScript, Straight, simulate


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_two_rows(tmp_path):
    log = parse_encoder_csv(write(tmp_path, "e.csv", "t,ticks\n0.0,0\n0.1,100\n"))
    assert len(log) == 2
    assert log.ticks[1] - log.ticks[0] == 100
    assert log[1] == (0.1, 100)


def test_comments_and_blank_lines(tmp_path):
    log = parse_gyro_csv(write(tmp_path, "g.csv", "# note\nt,omega\n\n0.0,0.5\n# mid\n1.0,0.25\n"))
    assert log.omega.tolist() == [0.5, 0.25]


def test_out_of_order(tmp_path):
    with pytest.raises(NonMonotonicTime):
        parse_encoder_csv(write(tmp_path, "e.csv", "t,ticks\n0.0,0\n0.2,5\n0.1,7\n"))


def test_duplicate_timestamp(tmp_path):
    with pytest.raises(NonMonotonicTime, match="duplicate"):
        parse_gyro_csv(write(tmp_path, "g.csv", "t,omega\n0.0,0\n0.0,1\n"))


def test_malformed_row_reports_line(tmp_path):
    p = write(tmp_path, "e.csv", "# c\nt,ticks\n0.0,0\n0.1,abc\n")
    with pytest.raises(MalformedRow) as exc:
        parse_encoder_csv(p)
    assert exc.value.line == 4


def test_wrong_field_count(tmp_path):
    with pytest.raises(MalformedRow) as exc:
        parse_encoder_csv(write(tmp_path, "e.csv", "t,ticks\n0.0,0\n0.1,2,3\n"))
    assert exc.value.line == 3


def test_bad_header(tmp_path):
    with pytest.raises(MalformedRow):
        parse_encoder_csv(write(tmp_path, "e.csv", "time,ticks\n0.0,0\n"))


def test_empty(tmp_path):
    with pytest.raises(EmptyFile):
        parse_encoder_csv(write(tmp_path, "e.csv", "t,ticks\n"))
    with pytest.raises(EmptyFile):
        parse_encoder_csv(write(tmp_path, "f.csv", "# only a comment\n"))


def test_missing_file(tmp_path):
    with pytest.raises(MissingInput):
        parse_gyro_csv(tmp_path / "nope.csv")


def test_non_finite_rejected(tmp_path):
    with pytest.raises(MalformedRow):
        parse_gyro_csv(write(tmp_path, "g.csv", "t,omega\n0.0,nan\n1.0,0\n"))


def test_gyro_rate_bound(tmp_path):
    p = write(tmp_path, "g.csv", "t,omega\n0.0,0\n1.0,25\n")
    with pytest.raises(MalformedRow):
        parse_gyro_csv(p)
    assert parse_gyro_csv(p, max_rate=30.0).omega[1] == 25.0


def test_reverse_ticks_need_declaration(tmp_path):
    body = "t,ticks\n0.0,10\n0.1,5\n"
    with pytest.raises(MalformedRow):
        parse_encoder_csv(write(tmp_path, "a.csv", body))
    log = parse_encoder_csv(write(tmp_path, "b.csv", "#direction=signed\n" + body))
    assert log.signed and log.ticks.tolist() == [10, 5]


def test_resample_midpoint():
    g = GyroLog([0.0, 1.0], [0.0, 1.0])
    assert resample_gyro(g, [0.5]).omega[0] == 0.5
    assert resample_gyro(g, [1.0]).omega[0] == 1.0


def test_resample_errors():
    g = GyroLog([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(OutOfRange):
        resample_gyro(g, [1.5])
    with pytest.raises(OutOfRange):
        resample_gyro(g, [-0.1])
    with pytest.raises(InsufficientData):
        resample_gyro(GyroLog([0.0], [1.0]), [0.0])


@given(
    hnp.arrays(np.float64, st.integers(2, 200), elements=st.floats(-5, 5, allow_nan=False)),
    st.data(),
)
def test_resample_exact_on_own_grid(omega, data):
    t = np.cumsum(np.full(len(omega), 0.01)) + 3.0
    g = GyroLog(t, omega)
    assert np.array_equal(resample_gyro(g, t).omega, omega)
    idx = data.draw(st.lists(st.integers(0, len(t) - 1), min_size=1, unique=True).map(sorted))
    assert np.array_equal(resample_gyro(g, t[idx]).omega, omega[idx])


def test_span_mismatch():
    enc = EncoderLog([0.0, 1.0, 2.0], [0, 1, 2])
    with pytest.raises(SpanMismatch):
        build_stream(enc, GyroLog([0.0, 1.5], [0.0, 0.0]))


@given(
    st.integers(2, 100),
    st.floats(0.001, 0.1),
    st.integers(1, 5),
)
def test_build_stream_alignment(n, dt, k):
    t_enc = np.arange(n) * dt
    t_gyro = np.linspace(0.0, t_enc[-1], k * n)
    enc = EncoderLog(t_enc, np.arange(n))
    s = build_stream(enc, GyroLog(t_gyro, np.sin(t_gyro)))
    assert len(s.encoder) == len(s.gyro_on_encoder_grid) == n
    assert np.array_equal(s.gyro_on_encoder_grid.t, s.encoder.t)
    assert np.all(np.isfinite(s.gyro_on_encoder_grid.omega))


def test_differentiated_velocity():
    script = ManeuverScript((Straight(5.0, 3.0), Arc(5.0, 0.3, 6.0), Straight(8.0, 3.0)), 100.0)
    res = simulate(script)
    s = res.stream
    assert s.ground_truth.velocity_source == MEASURED
    rebuilt = build_stream(s.encoder, s.gyro_on_encoder_grid, s.ground_truth.without_velocity())
    gt = rebuilt.ground_truth
    assert gt.velocity_source == DIFFERENTIATED
    # away from the velocity steps where the analytic rate is discontinuous
    smooth = np.abs(np.gradient(s.ground_truth.vx)) < 1e-6
    smooth[:2] = smooth[-2:] = False
    assert np.max(np.abs(gt.vx - s.ground_truth.vx)[smooth]) < 1e-3
    assert np.max(np.abs(gt.vy - s.ground_truth.vy)[smooth]) < 1e-3


def test_roundtrip_files(tmp_path, loop_sim):
    s = loop_sim.stream
    write_encoder_csv(tmp_path / "e.csv", s.encoder)
    write_gyro_csv(tmp_path / "g.csv", s.gyro_on_encoder_grid)
    write_ground_truth_csv(tmp_path / "gt.csv", s.ground_truth)
    enc = parse_encoder_csv(tmp_path / "e.csv")
    gyro = parse_gyro_csv(tmp_path / "g.csv")
    gt = parse_ground_truth_csv(tmp_path / "gt.csv")
    assert np.array_equal(enc.t, s.encoder.t) and np.array_equal(enc.ticks, s.encoder.ticks)
    assert np.array_equal(gyro.omega, s.gyro_on_encoder_grid.omega)
    for name in ("t", "x", "y", "yaw", "vx", "vy", "omega"):
        assert np.array_equal(getattr(gt, name), getattr(s.ground_truth, name))
    assert gt.velocity_source == MEASURED
    # writing the parsed data again is byte-identical
    write_encoder_csv(tmp_path / "e2.csv", enc)
    write_ground_truth_csv(tmp_path / "gt2.csv", gt)
    assert (tmp_path / "e.csv").read_bytes() == (tmp_path / "e2.csv").read_bytes()
    assert (tmp_path / "gt.csv").read_bytes() == (tmp_path / "gt2.csv").read_bytes()


def test_roundtrip_million_rows(tmp_path):
    n = 1_000_000
    rng = np.random.default_rng(3)
    t = np.arange(n) / 100.0
    ticks = np.cumsum(rng.integers(0, 40, n))
    write_encoder_csv(tmp_path / "e.csv", EncoderLog(t, ticks))
    log = parse_encoder_csv(tmp_path / "e.csv")
    assert np.array_equal(log.t, t) and np.array_equal(log.ticks, ticks)


@given(hnp.arrays(np.float64, st.integers(1, 50), elements=st.floats(-19, 19, allow_nan=False)))
def test_parse_write_idempotent(tmp_path_factory, omega):
    d = tmp_path_factory.mktemp("rt")
    t = np.arange(len(omega)) * 0.37 + 1e-3
    write_gyro_csv(d / "a.csv", GyroLog(t, omega))
    first = parse_gyro_csv(d / "a.csv")
    write_gyro_csv(d / "b.csv", first)
    second = parse_gyro_csv(d / "b.csv")
    assert np.array_equal(first.omega, second.omega) and np.array_equal(first.t, second.t)
    assert np.array_equal(first.omega, omega)

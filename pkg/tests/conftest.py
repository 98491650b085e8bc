import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ogodom.calib import CalibParams
from ogodom.ingest import EncoderLog, GroundTruth, GyroLog, SampleStream
from ogodom.odometry import WheelModel
from ogodom.synth import NoiseSpec, no_slip_loop, simulate

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# exercised extrinsics; the lever arm and mount angle are deliberately large
TRUE_EXT = CalibParams(0.30, (1.0, 0.5), 0.02)
# an encoder with effectively no quantization, for "noiseless" checks
FINE_N = 2**40


def make_stream(t, ticks, omega, gt=None, signed=False) -> SampleStream:
    t = np.asarray(t, dtype=float)
    return SampleStream(EncoderLog(t, ticks, signed=signed), GyroLog(t, omega), gt)


def static_gt(t) -> GroundTruth:
    z = np.zeros(len(t))
    return GroundTruth(t, z, z, z, z, z, z)


def noise_spec(n_ticks=4096, ext=TRUE_EXT, **kw) -> NoiseSpec:
    return NoiseSpec(wheel=WheelModel(ext.radius, n_ticks), extrinsics=ext, **kw)


@pytest.fixture(scope="session")
def loop_sim():
    return simulate(no_slip_loop(0), noise_spec())


@pytest.fixture(scope="session")
def fine_loop_sim():
    return simulate(no_slip_loop(0), noise_spec(FINE_N))


def crop(stream: SampleStream, i0: int, i1=None) -> SampleStream:
    """Samples i0..i1-1 of a stream, ground truth included."""
    sl = slice(i0, i1)
    enc, gyro, gt = stream.encoder, stream.gyro_on_encoder_grid, stream.ground_truth
    cut = None
    if gt is not None:
        cut = GroundTruth(gt.t[sl], gt.x[sl], gt.y[sl], gt.yaw[sl],
                          *(None if v is None else v[sl] for v in (gt.vx, gt.vy, gt.omega)),
                          gt.velocity_source)
    return SampleStream(EncoderLog(enc.t[sl], enc.ticks[sl], enc.signed),
                        GyroLog(gyro.t[sl], gyro.omega[sl]), cut)

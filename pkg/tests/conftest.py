import numpy as np
import pytest

from vlpsim.channel import NoiseModel, batch_received_power
from vlpsim.sensors import Pose, SensorFrame
from vlpsim.sim import Testbed, default_testbed

Testbed.__test__ = False  # name starts with "Test"; keep pytest from collecting it


@pytest.fixture(scope="session")
def testbed() -> Testbed:
    return default_testbed()


@pytest.fixture(scope="session")
def quiet_testbed() -> Testbed:
    return default_testbed(noise=NoiseModel(0.0, 0.0))


def make_frame(testbed: Testbed, position, roll=0.0, pitch=0.0, t=0.0) -> SensorFrame:
    """Noiseless synthetic frame: exact channel powers, exact sensors."""
    pos = np.asarray(position, dtype=float)
    powers = batch_received_power(
        testbed.luminaires, pos[None, :], np.array([roll]), np.array([pitch]), testbed.photodiode
    )[0]
    return SensorFrame(
        timestamp=t,
        rss=powers,
        accel=np.zeros(3),
        orientation=(roll, pitch, 0.0),
        baro_altitude=float(pos[2]),
        ground_truth=Pose(pos, roll, pitch, 0.0, t),
    )


@pytest.fixture
def frame_factory(quiet_testbed):
    def factory(position, roll=0.0, pitch=0.0, t=0.0):
        return make_frame(quiet_testbed, position, roll, pitch, t)

    return factory

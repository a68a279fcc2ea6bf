import numpy as np
import pytest

from evscan.body import make_toy_model
from evscan.geometry import CameraIntrinsics


@pytest.fixture(scope="session")
def toy_model():
    return make_toy_model()


@pytest.fixture(scope="session")
def paper_cam():
    return CameraIntrinsics(640, 480, 250.0, 250.0, 320.0, 240.0)


@pytest.fixture(scope="session")
def small_cam():
    """Paper intrinsics scaled to 64x48."""
    return CameraIntrinsics(64, 48, 25.0, 25.0, 32.0, 24.0)


def random_pose(rng):
    from scipy.spatial.transform import Rotation

    from evscan.geometry import CameraPose

    R = Rotation.random(random_state=np.random.RandomState(rng.integers(1 << 31))).as_matrix()
    T = rng.normal(0, 2.0, 3)
    return CameraPose(R=R, T=T, t=0.0)

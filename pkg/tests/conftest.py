import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from handsynth.scene import CameraKind, gesture_anchor, preset_camera
from handsynth.skeleton import default_rig


@pytest.fixture(scope="session")
def rig():
    return default_rig()


@pytest.fixture(scope="session")
def depth_cam(rig):
    return preset_camera("infotainment", "depth0", CameraKind.DEPTH, gesture_anchor(rig))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)

import numpy as np
import pytest

from splatlab.model import CameraModel, CameraRig


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def make_pinhole(width=65, height=65, f=65.0, **kw):
    return CameraRig(CameraModel.PINHOLE, f, f, width / 2, height / 2,
                     width, height, np.eye(3), np.zeros(3), **kw)


def make_fisheye(width=128, height=128, f=40.0, **kw):
    return CameraRig(CameraModel.FISHEYE_EQUIDISTANT, f, f, width / 2, height / 2,
                     width, height, np.eye(3), np.zeros(3), **kw)


def make_panorama(width=128, height=64, **kw):
    return CameraRig(CameraModel.EQUIRECTANGULAR, 1.0, 1.0, 0.0, 0.0,
                     width, height, np.eye(3), np.zeros(3), **kw)


@pytest.fixture
def pinhole_rig():
    return make_pinhole()


@pytest.fixture
def fisheye_rig():
    return make_fisheye()


@pytest.fixture
def panorama_rig():
    return make_panorama()

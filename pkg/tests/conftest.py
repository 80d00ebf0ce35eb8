import numpy as np
import pytest

from facefit.fit import default_init_params
from facefit.fixtures import sample_params, synthetic_target
from facefit.losses import LandmarkSet
from facefit.morphable import make_toy_model


@pytest.fixture(scope="session")
def toy_model():
    return make_toy_model(n_id=12, n_exp=8, n_tex=12, seed=0)


@pytest.fixture(scope="session")
def tiny_model():
    return make_toy_model(n_id=4, n_exp=3, n_tex=4, seed=1, subdivisions=1)


@pytest.fixture(scope="session")
def render_fixture(toy_model):
    """A 64x64 self-rendered target with its true parameters."""
    rng = np.random.default_rng(11)
    params = sample_params(toy_model, rng, 64, 64)
    image, depth, landmarks, rb = synthetic_target(toy_model, params, 64, 64)
    return dict(model=toy_model, params=params, image=image, depth=depth,
                landmarks=landmarks, rb=rb, width=64, height=64)


@pytest.fixture()
def init_pose_128(toy_model):
    return default_init_params(toy_model, 128, 128).pose

import numpy as np
import pytest

from ssrgan.gradcheck import small_model_config
from ssrgan.model import build_model


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_model():
    return build_model(small_model_config(0))

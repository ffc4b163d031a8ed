import numpy as np
import pytest

from levylogistic import ModelParams


def zero_drift(x):
    return np.zeros_like(x)


def unit_intensity(x):
    return np.ones_like(x)


@pytest.fixture
def levy_params():
    return ModelParams(r=1.0, sigma=0.5, alpha=0.5)

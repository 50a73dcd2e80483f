import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")

from irloss.data import Dataset  # noqa: E402
from irloss.model import init_params  # noqa: E402


@pytest.fixture
def tiny_params():
    """1 layer, H=3, D=4 inputs, M=4 outputs; deterministic."""
    return init_params([(4, 3)], 4, seed=11)


def make_dataset(n=6, t=3, seed=0):
    """Small positive-valued dataset in the four-measure layout."""
    rng = np.random.default_rng(seed)
    feats = rng.uniform(0.5, 5.0, size=(n, t, 4))
    targs = rng.uniform(0.5, 5.0, size=(n, 4))
    return Dataset(feats, targs, np.arange(n))


@pytest.fixture
def small_dataset():
    return make_dataset()

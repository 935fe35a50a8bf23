import numpy as np
import pytest

from fedtoken.data import Dataset, synth_gaussian
from fedtoken.rng import RngStream


@pytest.fixture
def gaussian_60x4():
    return synth_gaussian(60, 4, 3.0, RngStream(11, purpose="synth-data"))


@pytest.fixture
def two_class_200():
    # deterministic features, exactly 100 of each label
    gen = np.random.Generator(np.random.PCG64(5))
    feats = gen.standard_normal((200, 3))
    labels = np.array([1.0, -1.0] * 100)
    return Dataset(feats, labels)

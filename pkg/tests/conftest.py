import numpy as np
import pytest

from tec.tensor import CpTensor


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cp(rng, dims, rank, loc=0.0):
    return CpTensor([rng.normal(loc, 1.0, size=(i, rank)) for i in dims])


@pytest.fixture
def make_cp(rng):
    def make(dims=(4, 5, 3), rank=2, loc=0.0):
        return random_cp(rng, dims, rank, loc)
    return make

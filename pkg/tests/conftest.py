import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_psd(rng, m, rank=None, scale=1.0):
    rank = m if rank is None else rank
    a = rng.standard_normal((m, rank)) * scale
    return a @ a.T

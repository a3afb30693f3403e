import numpy as np
import pytest

from permstat.sampler import RandomStream

SEED = 20240607


@pytest.fixture
def stream():
    return RandomStream(SEED, 0)


def se_of_mean(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / np.sqrt(len(x)))

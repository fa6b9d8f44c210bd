import numpy as np
import pytest

from euler import environments
from euler.concentration import BonusConstants


@pytest.fixture
def rng():
    return np.random.default_rng(20190602)


@pytest.fixture
def constants():
    """Constants for S = A = 2, H = 4, K = 1000 and delta = 0.1."""
    return BonusConstants.for_problem(2, 2, 4, 1000, 0.1)


@pytest.fixture
def chain4():
    return environments.build(environments.ChainSpec(4))


@pytest.fixture
def det_chain5():
    return environments.build(environments.DeterministicChainSpec(5))

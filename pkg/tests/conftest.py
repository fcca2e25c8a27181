import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import nashalloc as na


@pytest.fixture
def two_bank_net():
    """The worked 2-bank network: society 1 each, 1 -> 2 owes 1, 2 -> 1 owes 0.5."""
    return na.validate_network([[1.0, 0.0, 1.0], [1.0, 0.5, 0.0]])


@pytest.fixture
def one_bank_net():
    return na.validate_network([[1.0, 0.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

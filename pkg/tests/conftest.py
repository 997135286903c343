import os
import sys

import numpy as np
import pytest

# make the shared oracles importable from test modules
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

# Shared fixtures for the laboratory test suite
import os
import sys
from pathlib import Path

os.environ.setdefault("NSIT_ENVIRONMENT", "testing")
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from optimize import SearchConfig  # noqa: E402
from qops_core import BipartiteLayout  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_search():
    return SearchConfig(restarts=4, max_iters=3000, seed=0)


@pytest.fixture
def layout22():
    return BipartiteLayout(2, 2)

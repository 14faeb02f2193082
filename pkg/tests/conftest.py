import os
import sys

import pytest

# Add the project root directory to the path so we can import our modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.api.scenarios import reproduction_grid
from src.models.timegrid import build_grid


@pytest.fixture(scope="session")
def day_grid():
    """One day at 5 min system / 10 s control resolution (N_S = 288)."""
    return reproduction_grid()


@pytest.fixture(scope="session")
def hour_grid():
    """One hour, 12 system intervals, markets at the system resolution, no lead times."""
    return build_grid({"H": 3600, "S": 300, "C": 10})


@pytest.fixture(scope="session")
def tiny_grid():
    """Four system intervals of 300 s with 30 s control steps."""
    return build_grid({"H": 1200, "S": 300, "C": 30})

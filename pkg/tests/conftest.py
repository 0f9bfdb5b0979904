import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from fem_core import assemble_fine_operators  # noqa: E402
from mesh import build_grid_pair  # noqa: E402
from potentials import PotentialField, smooth_potential  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if os.environ.get("MSFEM_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="долгий тест: установите MSFEM_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def constant_potential(grid, value=2.0):
    """V = value everywhere, sampled at the fine quadrature points."""
    return PotentialField(np.full((grid.n_fine, 2), value), value, value, name='constant',
                          evaluator=lambda x: np.full_like(x, value, dtype=float))


@pytest.fixture
def smooth_case():
    """grid(16, 8), eps = 1/8, V = cos(10x) + 2."""
    grid = build_grid_pair(16, 8)
    V = smooth_potential(0.1, grid)
    return grid, V, assemble_fine_operators(grid, V, 0.125)

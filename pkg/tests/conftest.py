import numpy as np
import pytest

from goupsim.levy_paths import (
    DyadicGrid,
    GammaDrift,
    LevyPathSample,
    RngSeed,
)


def make_drift_path(level: int, k_min: int, k_max: int, drift: float = 1.0) -> LevyPathSample:
    """Deterministic pure-drift path x_k = drift * t_k (test fixture)."""
    grid = DyadicGrid(level, k_min, k_max)
    ks = np.arange(k_min, k_max + 1, dtype=float)
    values = drift * ks * grid.dt
    return LevyPathSample(grid, values, RngSeed(0), GammaDrift(1.0, 1.0, drift))


@pytest.fixture
def drift_path():
    return make_drift_path(level=6, k_min=-256, k_max=256, drift=1.0)

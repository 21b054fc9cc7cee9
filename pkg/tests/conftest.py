"""Shared fixtures: synthetic panels and their feature bundles.

Everything here is deterministic; session scope amortizes the generator
and the normalization work across test modules.
"""

import numpy as np
import pytest

from splitcast.features import MarketData
from splitcast.panel import SyntheticConfig, generate_synthetic_panel


@pytest.fixture(scope="session")
def panel_small():
    # 140 days: a 100 day training window plus lag history plus targets
    return generate_synthetic_panel(SyntheticConfig(days=140), seed=101)


@pytest.fixture(scope="session")
def data_small(panel_small):
    return MarketData.from_panel(panel_small)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20230817)

import numpy as np
import pytest

from edgesim import presets


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def profiles():
    return {p.name: p for p in presets.default_profiles()}

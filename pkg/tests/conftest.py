import pytest

from core.form import DiffusionSpec
from core.montecarlo import SimConfig
from core.named import brownian_01, brownian_line, cantor_scale, rational_windows


@pytest.fixture(scope="session")
def brownian_line_spec() -> DiffusionSpec:
    return brownian_line()


@pytest.fixture(scope="session")
def brownian_01_spec() -> DiffusionSpec:
    return brownian_01()


@pytest.fixture(scope="session")
def cantor_spec() -> DiffusionSpec:
    return cantor_scale()


@pytest.fixture(scope="session")
def windows_spec() -> DiffusionSpec:
    return rational_windows()


@pytest.fixture
def sim_config() -> SimConfig:
    return SimConfig(seed=20211, step_h=1 / 64, max_steps=10 ** 6, block_size=1024, workers=1)

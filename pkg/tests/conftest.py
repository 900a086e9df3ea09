import pytest

from vawtopt import oracle
from vawtopt.design_space import DesignSpaceBounds


@pytest.fixture(scope="session")
def default_bounds():
    return DesignSpaceBounds.default()


@pytest.fixture(scope="session")
def oracle_config():
    return oracle.OracleConfig()


@pytest.fixture(scope="session")
def dataset_250(default_bounds, oracle_config):
    """The canonical 250-observation training set (seed 11)."""
    return oracle.generate_dataset(default_bounds, 250, 11, oracle_config)


@pytest.fixture(scope="session")
def test_grid_24(oracle_config):
    """Canonical 24-point evaluation grid over the extended contour region
    (cell centers of a 6 x 4 partition)."""
    return oracle.extended_test_grid(oracle_config)

"""Common fixtures for acceptance testing."""

import logging
import os

import pytest

from gridnadir.cli import dispatch
from gridnadir.data import AREAS_DIR, SNAPSHOTS_DIR, SYSTEM_DIR
from gridnadir.dataset import DatasetConfig

LOGGER = logging.getLogger(__name__)


@pytest.fixture(scope="session")
def solver():
    """Solver under test; an executable path or 'scipy'."""
    yield os.environ.get("GRIDNADIR_INT_SOLVER", "scipy")


@pytest.fixture(scope="session")
def area():
    yield os.environ.get("GRIDNADIR_INT_AREA", "A1")


@pytest.fixture(scope="session")
def fleet(area: str):
    yield AREAS_DIR / "{}.json".format(area)


@pytest.fixture(scope="session")
def snapshots(area: str):
    yield SNAPSHOTS_DIR / "{}.json".format(area)


@pytest.fixture(scope="session")
def system():
    yield SYSTEM_DIR


@pytest.fixture(scope="session")
def dataset_config(tmp_path_factory):
    """Coarse sweep keeping every simulated row."""
    config = DatasetConfig(
        imbalance_grid=[-400.0, -300.0, -200.0, -100.0, 100.0, 200.0, 300.0, 400.0],
        n_epc=3,
        n_dlc=2,
        clusters=3,
        dt=0.01,
        horizon=10.0,
        band=(0.0, 100.0),
    )
    yield config.to_file(tmp_path_factory.mktemp("config") / "dataset.json")


@pytest.fixture
def run():
    """Run one command line and require success."""

    def _run(*args):
        argv = [str(arg) for arg in args]
        LOGGER.debug("gridnadir %s", " ".join(argv))
        code = dispatch(argv)
        assert code == 0, "gridnadir {} exited with {}".format(argv[0], code)

    yield _run

"""Shared fixtures: Earth-Moon orbits built by the corrector, catalogs and small environments."""

import numpy as np
import pytest
import yaml

from cisphase.catalog import TimeGrid, correct_planar_orbit, lyapunov_orbit, write_catalog
from cisphase.observation import MeasurementModel, TargetTrack, TaskingEnvironment

EARTH_MOON_MU = 0.012150585609624


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end studies")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def mu():
    return EARTH_MOON_MU


@pytest.fixture(scope="session")
def l1_orbit(mu):
    return lyapunov_orbit(mu, "L1", 0.01, "L1-a")


@pytest.fixture(scope="session")
def l2_orbit(mu):
    return lyapunov_orbit(mu, "L2", 0.01, "L2-a")


@pytest.fixture(scope="session")
def l1_wide(mu):
    return lyapunov_orbit(mu, "L1", 0.02, "L1-b")


@pytest.fixture(scope="session")
def l2_wide(mu):
    return lyapunov_orbit(mu, "L2", 0.02, "L2-b")


@pytest.fixture(scope="session")
def dro(mu):
    """Distant retrograde orbit about the Moon, started on the far side."""
    r = 0.05
    x0 = 1.0 - mu + r
    vy0 = -(np.sqrt(mu / r) + r)
    return correct_planar_orbit(mu, x0, vy0, "DRO-a", "dro")


@pytest.fixture(scope="session")
def catalog_orbits(l1_orbit, l2_orbit, l1_wide, l2_wide, dro):
    return [l1_orbit, l2_orbit, l1_wide, l2_wide, dro]


@pytest.fixture(scope="session")
def catalog_file(tmp_path_factory, catalog_orbits):
    path = tmp_path_factory.mktemp("catalog") / "orbits.csv"
    write_catalog(catalog_orbits, path)
    return path


@pytest.fixture
def make_env():
    """Factory: observers are orbits, targets are (orbit, phase) pairs."""

    def build(observers, targets, steps=10, t_end=1.0, measurement=None):
        grid = TimeGrid(0.0, t_end, steps)
        tracks = [TargetTrack.build(orbit, phase, grid) for orbit, phase in targets]
        return TaskingEnvironment(grid, list(observers), tracks, measurement or MeasurementModel())

    return build


@pytest.fixture
def scenario_file(tmp_path, catalog_file):
    """Writes a scenario YAML next to a copy of the catalog reference; returns a writer."""

    def write(observers, targets, steps=8, t_end=0.8, name="test", **extra):
        data = {
            "name": name,
            "catalog": str(catalog_file),
            "grid": {"t_start": 0.0, "t_end": t_end, "steps": steps},
            "observers": observers,
            "targets": targets,
        }
        data.update(extra)
        path = tmp_path / f"{name}.yaml"
        path.write_text(yaml.safe_dump(data, sort_keys=False))
        return path

    return write

"""Shared fixtures: scenarios, mapping data, and trained models.

The expensive artifacts (mapping pass, classifier training, distance grids)
are session-scoped so the whole suite trains each model exactly once.
"""

import time

import numpy as np
import pytest

from cbflearn import builtin_scenario_path
from cbflearn.environment import (Circle, ControlConfig, LearnerConfig,
                                  Scenario, SensorConfig, Workspace,
                                  build_sdf_grid, load_scenario)
from cbflearn.sim import mapping_pass, train_barrier


@pytest.fixture(scope="session")
def five_ellipse():
    return load_scenario(builtin_scenario_path("five_ellipse"))


@pytest.fixture(scope="session")
def single_circle():
    return load_scenario(builtin_scenario_path("single_circle"))


@pytest.fixture(scope="session")
def free_scenario():
    """Obstacle-free arena: nominal control is never constrained."""
    return Scenario(workspace=Workspace(-1.6, 1.6, -1.0, 1.0), obstacles=(),
                    x_start=((-1.4, 0.0),), x_goal=(1.4, 0.0))


@pytest.fixture(scope="session")
def circle_scenario():
    """One circle squarely between start and goal."""
    return Scenario(workspace=Workspace(-1.6, 1.6, -1.0, 1.0),
                    obstacles=(Circle(center=(0.0, 0.0), radius=0.35),),
                    x_start=((-1.4, 0.05),), x_goal=(1.2, 0.0),
                    sensor=SensorConfig(num_beams=360, max_range=1.0),
                    learner=LearnerConfig(grid_spacing=0.16, sigma1=0.32,
                                          sigma2=2.0, dedup_tol=0.03),
                    control=ControlConfig(delta=1.0, gamma=3.0, dt=0.02))


@pytest.fixture(scope="session")
def fe_mapping_data(five_ellipse):
    return mapping_pass(five_ellipse)


@pytest.fixture(scope="session")
def fe_training(five_ellipse, fe_mapping_data):
    """(model, train_seconds) for the five-ellipse mapping dataset."""
    t0 = time.perf_counter()
    model = train_barrier(five_ellipse, fe_mapping_data)
    return model, time.perf_counter() - t0


@pytest.fixture(scope="session")
def fe_model(fe_training):
    return fe_training[0]


@pytest.fixture(scope="session")
def fe_sdf_grid(five_ellipse):
    return build_sdf_grid(five_ellipse, 0.01)


@pytest.fixture(scope="session")
def circle_model(circle_scenario):
    data = mapping_pass(circle_scenario)
    return train_barrier(circle_scenario, data)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

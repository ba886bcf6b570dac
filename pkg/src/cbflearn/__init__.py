"""Learning control barrier functions from simulated LiDAR data.

A biased-penalty kernel SVM turns laser-scan training samples into a barrier
classifier whose decision value filters a nominal go-to-goal controller
through a minimum-norm QP. Resulting trajectories are compared against a
ground-truth signed-distance barrier with correlation and Frechet metrics.
"""

from importlib import resources

from .environment import (Circle, ControlConfig, Ellipse, LearnerConfig,
                          Polygon, Scenario, ScenarioError, SensorConfig,
                          SignedDistanceGrid, Workspace, build_sdf_grid,
                          load_scenario, true_signed_distance)
from .sensor import LaserScan, SensorError, scan, scan_to_world
from .dataset import TrainingSet, aggregate, generate_training_data
from .kernelnet import (FeatureMap, KernelConfig, build_feature_map,
                        featurize, kernel, kernel_gradient)
from .svm import (BarrierModel, DegenerateDataError, HardMarginInfeasibleError,
                  SvmConfig, decision, decision_gradient, train)
from .control import ControlOutput, admissible, filter_control, nominal_policy, safe_control
from .sim import (RunReport, Trajectory, mapping_pass, run_ground_truth,
                  run_offline, run_online, train_barrier)
from .metrics import correlation, frechet_distance, resample_by_arclength

__version__ = "0.1.0"


def builtin_scenario_path(name: str):
    """Path to a scenario file shipped with the package (e.g. 'five_ellipse')."""
    p = resources.files("cbflearn") / "scenarios" / f"{name}.toml"
    if not p.is_file():
        raise FileNotFoundError(f"no builtin scenario named {name!r}")
    return p


def builtin_scenario(name: str) -> Scenario:
    return load_scenario(builtin_scenario_path(name))

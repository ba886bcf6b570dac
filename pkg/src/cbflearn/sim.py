"""Simulation drivers for the learned-barrier controller.

Three pipelines share one Euler rollout loop:
  * ground truth: barrier = signed-distance grid of the true geometry;
  * offline: a mapping pass gathers scans from a vantage grid, the
    classifier is trained once, then the robot drives to the goal;
  * online: at every step the robot scans, regenerates (or aggregates) the
    training set, retrains with a warm start, and applies the filtered
    control.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import control as ctrl
from . import dataset as ds
from . import svm
from .environment import (Scenario, SensorConfig, SignedDistanceGrid,
                          build_sdf_grid, true_signed_distance)
from .kernelnet import (FeatureMap, KernelConfig, feature_map_for,
                        featurize, kernel_between_features, kernel_config_for)
from .sensor import scan

DEFAULT_STEP_CAP = 100_000

MODE_GROUND_TRUTH = "ground-truth"
MODE_OFFLINE = "offline"
MODE_ONLINE_AGGREGATE = "online-aggregate"
MODE_ONLINE_INSTANT = "online-instant"


class StartUnsafeError(RuntimeError):
    """Requested start state is not in the (learned or true) safe set."""


@dataclass
class Trajectory:
    times: np.ndarray          # (n,)
    states: np.ndarray         # (n, 2)
    controls: np.ndarray       # (n, 2); final row is zero
    barrier_values: np.ndarray  # (n,) h-hat along the run
    true_sdf_values: np.ndarray
    constraint_active: np.ndarray  # (n,) bool
    reached_goal: bool
    steps: int

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("t,x,y,ux,uy,h_hat,true_sdf,constraint_active\n")
            for k in range(len(self.times)):
                f.write(f"{float(self.times[k])!r},{float(self.states[k, 0])!r},"
                        f"{float(self.states[k, 1])!r},"
                        f"{float(self.controls[k, 0])!r},{float(self.controls[k, 1])!r},"
                        f"{float(self.barrier_values[k])!r},"
                        f"{float(self.true_sdf_values[k])!r},"
                        f"{int(self.constraint_active[k])}\n")


def read_trajectory_csv(path) -> np.ndarray:
    """Load the (x, y) polyline of an exported trajectory CSV."""
    pts = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header[:3] != ["t", "x", "y"]:
            raise ValueError(f"{path}: not a trajectory CSV (header {header})")
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            try:
                pts.append((float(parts[1]), float(parts[2])))
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row") from exc
    if len(pts) < 2:
        raise ValueError(f"{path}: trajectory needs at least 2 rows")
    return np.asarray(pts)


@dataclass
class RunReport:
    trajectory: Trajectory
    mode: str
    training_set_size: int = 0
    retrain_count: int = 0
    wall_time: float = 0.0
    safety_violations: int = 0
    unconstrained_steps: int = 0
    min_barrier_value: float = float("inf")
    min_true_sdf: float = float("inf")
    local_safety_margin_min: float = float("inf")
    final_model: "svm.BarrierModel | None" = field(default=None, repr=False)


def mapping_pass(scenario: Scenario, vantage_spacing: float | None = None,
                 sensor_config: SensorConfig | None = None,
                 offset_d: float | None = None,
                 dedup_tol: float | None = None,
                 rng: np.random.Generator | None = None) -> ds.TrainingSet:
    """Aggregate scans from every collision-free point of a vantage grid."""
    ws = scenario.workspace
    cfg = sensor_config or scenario.sensor
    spacing = vantage_spacing if vantage_spacing is not None else scenario.learner.vantage_spacing
    if spacing <= 0:
        raise ValueError("vantage_spacing must be positive")
    d = offset_d if offset_d is not None else scenario.learner.offset_d
    tol = dedup_tol if dedup_tol is not None else scenario.learner.dedup_tol
    xs = np.arange(ws.x_min + spacing / 2, ws.x_max, spacing)
    ys = np.arange(ws.y_min + spacing / 2, ws.y_max, spacing)
    gx, gy = np.meshgrid(xs, ys)
    vantages = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    free = np.asarray(true_signed_distance(scenario, vantages)) > 1e-9
    if not free.any():
        raise ValueError("mapping pass found no collision-free vantage points")
    data = ds.TrainingSet()
    for t, pose in enumerate(vantages[free]):
        sweep = scan(scenario, pose, cfg, rng=rng, timestamp=float(t))
        data = ds.aggregate(data, ds.generate_training_data(sweep, d), tol)
    return data


def train_barrier(scenario: Scenario, data: ds.TrainingSet,
                  track_objective: bool = False) -> svm.BarrierModel:
    """Train the barrier classifier with the scenario's learner settings."""
    fmap = feature_map_for(scenario)
    kcfg = kernel_config_for(scenario)
    scfg = svm.SvmConfig(c_plus=scenario.learner.c_plus,
                         c_minus=scenario.learner.c_minus_init,
                         tolerance=scenario.learner.kkt_tolerance,
                         max_iters=scenario.learner.max_iters,
                         track_objective=track_objective)
    return svm.train(data, scfg, kcfg, fmap)


def _rollout(scenario: Scenario, start, h_func, grad_func, step_cap: int):
    """Shared Euler loop; h_func/grad_func evaluate the barrier in use."""
    cfg = scenario.control
    goal = np.asarray(scenario.x_goal)
    x = np.asarray(start, dtype=float).copy()
    times, states, controls, hs, sdfs, actives = [], [], [], [], [], []
    reached = False
    steps = 0
    for k in range(step_cap):
        h = h_func(x)
        out = ctrl.filter_control(h, grad_func(x),
                                  ctrl.nominal_policy(x, goal, cfg.delta),
                                  cfg.gamma, cfg.u_max)
        times.append(k * cfg.dt)
        states.append(x.copy())
        controls.append(out.u.copy())
        hs.append(h)
        sdfs.append(true_signed_distance(scenario, x))
        actives.append(out.constraint_active)
        x = x + cfg.dt * out.u
        steps = k + 1
        if np.linalg.norm(x - goal) <= scenario.goal_radius:
            reached = True
            break
    times.append(steps * cfg.dt)
    states.append(x.copy())
    controls.append(np.zeros(2))
    hs.append(h_func(x))
    sdfs.append(true_signed_distance(scenario, x))
    actives.append(False)
    return Trajectory(times=np.asarray(times), states=np.asarray(states),
                      controls=np.asarray(controls),
                      barrier_values=np.asarray(hs),
                      true_sdf_values=np.asarray(sdfs),
                      constraint_active=np.asarray(actives, dtype=bool),
                      reached_goal=reached, steps=steps)


def _finish(traj: Trajectory, mode: str, t0: float, **extra) -> RunReport:
    finite_h = traj.barrier_values[np.isfinite(traj.barrier_values)]
    min_h = float(np.min(finite_h)) if len(finite_h) else float("inf")
    return RunReport(trajectory=traj, mode=mode, wall_time=time.perf_counter() - t0,
                     safety_violations=int(np.sum(traj.true_sdf_values < 0)),
                     min_barrier_value=min_h,
                     min_true_sdf=float(np.min(traj.true_sdf_values)), **extra)


def run_offline(scenario: Scenario, start, model: svm.BarrierModel | None = None,
                data: ds.TrainingSet | None = None,
                step_cap: int = DEFAULT_STEP_CAP,
                rng: np.random.Generator | None = None) -> RunReport:
    """Mapping pass, one training run, then drive to the goal."""
    t0 = time.perf_counter()
    retrains = 0
    if model is None:
        if data is None:
            data = mapping_pass(scenario, rng=rng)
        if len(data) >= 2 and data.has_both_labels():
            model = train_barrier(scenario, data)
            retrains = 1
    if model is None:
        # Nothing sensed anywhere (e.g. obstacle-free arena): no barrier to
        # learn, so the rollout is pure nominal.
        traj = _rollout(scenario, start, lambda x: float("nan"),
                        lambda x: np.zeros(2), step_cap)
        return _finish(traj, MODE_OFFLINE, t0,
                       training_set_size=len(data), retrain_count=0)
    if model.decision(np.asarray(start, dtype=float)) <= 0:
        raise StartUnsafeError("start outside learned safe set")
    traj = _rollout(scenario, start, model.decision, model.decision_gradient, step_cap)
    return _finish(traj, MODE_OFFLINE, t0,
                   training_set_size=len(data) if data is not None else len(model.alphas),
                   retrain_count=retrains, final_model=model)


def run_ground_truth(scenario: Scenario, start,
                     grid: SignedDistanceGrid | None = None,
                     grid_spacing: float = 0.01,
                     step_cap: int = DEFAULT_STEP_CAP) -> RunReport:
    """Reference run with the true signed-distance barrier on a grid."""
    t0 = time.perf_counter()
    if true_signed_distance(scenario, np.asarray(start)) <= 0:
        raise StartUnsafeError(f"start {tuple(start)} lies inside an obstacle")
    if grid is None:
        grid = build_sdf_grid(scenario, grid_spacing)
    traj = _rollout(scenario, start, grid.interpolate, grid.gradient, step_cap)
    return _finish(traj, MODE_GROUND_TRUTH, t0)


class _GramCache:
    """Incrementally extended features + Gram matrix for online aggregation."""

    def __init__(self, kcfg: KernelConfig, fmap: FeatureMap):
        self.kcfg = kcfg
        self.fmap = fmap
        self.features = np.empty((0, fmap.dim))
        self.gram = np.empty((0, 0))

    def extend(self, new_positions: np.ndarray) -> None:
        if len(new_positions) == 0:
            return
        fnew = featurize(self.fmap, new_positions)
        cross = kernel_between_features(self.kcfg, self.features, fnew)
        corner = kernel_between_features(self.kcfg, fnew, fnew)
        n_old = len(self.features)
        n = n_old + len(fnew)
        gram = np.empty((n, n))
        gram[:n_old, :n_old] = self.gram
        gram[:n_old, n_old:] = cross
        gram[n_old:, :n_old] = cross.T
        gram[n_old:, n_old:] = corner
        self.gram = gram
        self.features = np.concatenate([self.features, fnew])


def run_online(scenario: Scenario, start, aggregate: bool = True,
               step_cap: int = DEFAULT_STEP_CAP,
               rng: np.random.Generator | None = None,
               retrain_every: int = 1) -> RunReport:
    """Per-step scan / retrain / filter loop (with or without aggregation)."""
    t0 = time.perf_counter()
    if true_signed_distance(scenario, np.asarray(start)) <= 0:
        raise StartUnsafeError(f"start {tuple(start)} lies inside an obstacle")
    cfg = scenario.control
    goal = np.asarray(scenario.x_goal)
    fmap = feature_map_for(scenario)
    kcfg = kernel_config_for(scenario)
    tol = scenario.learner.dedup_tol
    d = scenario.learner.offset_d
    c_minus = scenario.learner.c_minus_init
    cache = _GramCache(kcfg, fmap) if aggregate else None
    data = ds.TrainingSet()
    alphas = np.empty(0)
    model: svm.BarrierModel | None = None
    x = np.asarray(start, dtype=float).copy()
    times, states, controls, hs, sdfs, actives = [], [], [], [], [], []
    reached = False
    retrains = 0
    unconstrained = 0
    safety_margin_min = float("inf")
    steps = 0
    for k in range(step_cap):
        sdf_here = true_signed_distance(scenario, x)
        if sdf_here > 0:
            sweep = scan(scenario, x, scenario.sensor, rng=rng, timestamp=k * cfg.dt)
            fresh = ds.generate_training_data(sweep, d)
            if aggregate:
                n_old = len(data)
                data = ds.aggregate(data, fresh, tol)
                cache.extend(data.positions[n_old:])
                alphas = np.concatenate([alphas, np.zeros(len(data) - n_old)])
            else:
                data = fresh
        retrain_due = (k % retrain_every == 0) or model is None
        if retrain_due and len(data) >= 2 and data.has_both_labels():
            scfg = svm.SvmConfig(c_plus=scenario.learner.c_plus, c_minus=c_minus,
                                 tolerance=scenario.learner.kkt_tolerance,
                                 max_iters=scenario.learner.max_iters)
            if aggregate:
                model = svm.train(data, scfg, kcfg, fmap, gram=cache.gram,
                                  initial_alphas=alphas)
                alphas = model.diagnostics.alphas_full
            else:
                model = svm.train(data, scfg, kcfg, fmap)
            c_minus = model.diagnostics.c_minus_final
            retrains += 1
        elif not aggregate and not (len(data) >= 2 and data.has_both_labels()):
            model = None  # nothing sensed this step: no local barrier
        u_nom = ctrl.nominal_policy(x, goal, cfg.delta)
        if model is None:
            h = float("nan")
            out = ctrl.ControlOutput(u=u_nom, constraint_active=False,
                                     h_value=h, h_gradient=np.zeros(2))
            unconstrained += 1
        else:
            h = model.decision(x)
            out = ctrl.filter_control(h, model.decision_gradient(x), u_nom,
                                      cfg.gamma, cfg.u_max)
        times.append(k * cfg.dt)
        states.append(x.copy())
        controls.append(out.u.copy())
        hs.append(h)
        sdfs.append(sdf_here)
        actives.append(out.constraint_active)
        x = x + cfg.dt * out.u
        if model is not None and out.constraint_active:
            margin = model.decision(x) + cfg.gamma * cfg.dt * abs(h)
            safety_margin_min = min(safety_margin_min, float(margin))
        steps = k + 1
        if np.linalg.norm(x - goal) <= scenario.goal_radius:
            reached = True
            break
    times.append(steps * cfg.dt)
    states.append(x.copy())
    controls.append(np.zeros(2))
    hs.append(model.decision(x) if model is not None else float("nan"))
    sdfs.append(true_signed_distance(scenario, x))
    actives.append(False)
    traj = Trajectory(times=np.asarray(times), states=np.asarray(states),
                      controls=np.asarray(controls), barrier_values=np.asarray(hs),
                      true_sdf_values=np.asarray(sdfs),
                      constraint_active=np.asarray(actives, dtype=bool),
                      reached_goal=reached, steps=steps)
    mode = MODE_ONLINE_AGGREGATE if aggregate else MODE_ONLINE_INSTANT
    report = _finish(traj, mode, t0, training_set_size=len(data),
                     retrain_count=retrains, unconstrained_steps=unconstrained,
                     final_model=model)
    report.local_safety_margin_min = safety_margin_min
    return report


def export_levelset(model: svm.BarrierModel, scenario: Scenario, spacing: float,
                    path) -> None:
    """Dump x, y, h_hat on a uniform grid for contour plotting."""
    ws = scenario.workspace
    xs = np.arange(ws.x_min, ws.x_max + spacing / 2, spacing)
    ys = np.arange(ws.y_min, ws.y_max + spacing / 2, spacing)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    vals = model.decision(pts)
    with open(path, "w") as f:
        f.write("x,y,h_hat\n")
        for (px, py), v in zip(pts, vals):
            f.write(f"{float(px)!r},{float(py)!r},{float(v)!r}\n")

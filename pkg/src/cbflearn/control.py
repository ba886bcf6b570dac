"""Minimum-norm QP safety filter over single-integrator dynamics.

The nominal go-to-goal policy is filtered through the barrier constraint
grad_h . u >= -gamma * h. With one affine constraint the QP is a projection
onto a half-space and is solved in closed form. A vanishing barrier gradient
with a strictly positive required rate is unsatisfiable; the filter then
stops the robot and raises a flag rather than ignoring the constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import ControlConfig
from .svm import BarrierModel

GRAD_EPS = 1e-12


@dataclass(frozen=True)
class ControlOutput:
    u: np.ndarray
    constraint_active: bool
    h_value: float
    h_gradient: np.ndarray
    infeasible_fallback: bool = False


def nominal_policy(x, x_goal, delta: float) -> np.ndarray:
    """Constant-speed go-to-goal direction; zero at the goal itself."""
    d = np.asarray(x_goal, dtype=float) - np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm < 1e-9:
        return np.zeros(2)
    return delta * d / norm


def filter_control(h: float, grad: np.ndarray, u_nominal: np.ndarray,
                   gamma: float, u_max: float | None = None) -> ControlOutput:
    """Project the nominal input onto {u | grad . u >= -gamma h}."""
    grad = np.asarray(grad, dtype=float)
    u_nominal = np.asarray(u_nominal, dtype=float)
    required = -gamma * h
    gnorm2 = float(grad @ grad)
    if gnorm2 < GRAD_EPS ** 2:
        if required > 0.0:
            return ControlOutput(u=np.zeros(2), constraint_active=True,
                                 h_value=h, h_gradient=grad,
                                 infeasible_fallback=True)
        return ControlOutput(u=u_nominal.copy(), constraint_active=False,
                             h_value=h, h_gradient=grad)
    slack = float(grad @ u_nominal) - required
    if slack >= 0.0:
        u = u_nominal.copy()
        active = False
    else:
        u = u_nominal + (-slack / gnorm2) * grad
        active = True
    fallback = False
    if u_max is not None:
        u = np.clip(u, -u_max, u_max)
        if float(grad @ u) - required < -1e-9:
            fallback = True
    return ControlOutput(u=u, constraint_active=active, h_value=h,
                         h_gradient=grad, infeasible_fallback=fallback)


def safe_control(x, model: BarrierModel, config: ControlConfig, x_goal) -> ControlOutput:
    """Barrier-filtered control at state x using the learned barrier."""
    h = model.decision(x)
    grad = model.decision_gradient(x)
    u_nom = nominal_policy(x, x_goal, config.delta)
    return filter_control(h, grad, u_nom, config.gamma, config.u_max)


def admissible(x, u, model: BarrierModel, config: ControlConfig,
               tol: float = 1e-9) -> bool:
    """Whether u satisfies the barrier rate constraint at x."""
    h = model.decision(x)
    grad = model.decision_gradient(x)
    return float(grad @ np.asarray(u, dtype=float)) + config.gamma * h >= -tol

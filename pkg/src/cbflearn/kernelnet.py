"""Two-layer Gaussian kernel machinery.

Layer one maps a 2D point to a vector of Gaussian bumps anchored on a fixed
grid over the workspace (an occupancy-map style feature lift). Layer two is a
Gaussian kernel between feature vectors, used by the SVM. Both layers are
smooth, and the analytic gradient of the composed kernel with respect to the
query point is provided for the Lie-derivative constraint in the controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import Scenario, Workspace


@dataclass(frozen=True)
class KernelConfig:
    sigma1: float          # first-layer bandwidth [m]
    sigma2: float = 1.0    # second-layer bandwidth [feature units]
    grid_spacing: float = 0.16

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0 or self.grid_spacing <= 0:
            raise ValueError("kernel bandwidths and grid spacing must be positive")


@dataclass(frozen=True)
class FeatureMap:
    centers: np.ndarray    # (M, 2) grid points over the workspace
    sigma1: float
    spacing: float

    @property
    def dim(self) -> int:
        return len(self.centers)


def build_feature_map(workspace: Workspace, spacing: float, sigma1: float) -> FeatureMap:
    """Uniform grid of kernel centers covering the workspace."""
    nx = int(math.ceil(workspace.width / spacing)) + 1
    ny = int(math.ceil(workspace.height / spacing)) + 1
    xs = workspace.x_min + spacing * np.arange(nx)
    ys = workspace.y_min + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    return FeatureMap(centers=centers, sigma1=sigma1, spacing=spacing)


def feature_map_for(scenario: Scenario) -> FeatureMap:
    return build_feature_map(scenario.workspace, scenario.grid_spacing(), scenario.sigma1())


def kernel_config_for(scenario: Scenario) -> KernelConfig:
    return KernelConfig(sigma1=scenario.sigma1(), sigma2=scenario.learner.sigma2,
                        grid_spacing=scenario.grid_spacing())


def featurize(fmap: FeatureMap, x) -> np.ndarray:
    """First-layer features exp(-|x - c_j|^2 / sigma1^2).

    Accepts a single point (2,) -> (M,) or a batch (n, 2) -> (n, M).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    d2 = np.sum((pts[:, None, :] - fmap.centers[None, :, :]) ** 2, axis=-1)
    out = np.exp(-d2 / fmap.sigma1 ** 2)
    return out[0] if single else out


def kernel_between_features(config: KernelConfig, fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
    """Second-layer Gaussian kernel on feature rows: (n, M) x (m, M) -> (n, m)."""
    fa = np.atleast_2d(fa)
    fb = np.atleast_2d(fb)
    d2 = (np.sum(fa ** 2, axis=1)[:, None] + np.sum(fb ** 2, axis=1)[None, :]
          - 2.0 * fa @ fb.T)
    return np.exp(-np.maximum(d2, 0.0) / config.sigma2 ** 2)


def kernel(config: KernelConfig, fmap: FeatureMap, x_a, x_b) -> float:
    """Composed two-layer kernel between two workspace points."""
    fa = featurize(fmap, np.asarray(x_a, dtype=float))
    fb = featurize(fmap, np.asarray(x_b, dtype=float))
    return float(kernel_between_features(config, fa, fb)[0, 0])


def kernel_gradient(config: KernelConfig, fmap: FeatureMap, x_query, x_support) -> np.ndarray:
    """d/dx_query of kernel(x_query, x_support), by the chain rule through
    both Gaussian layers."""
    x_query = np.asarray(x_query, dtype=float)
    fq = featurize(fmap, x_query)
    fs = featurize(fmap, np.asarray(x_support, dtype=float))
    k2 = float(kernel_between_features(config, fq, fs)[0, 0])
    return k2 * _feature_jacobian_pullback(config, fmap, x_query, fq, fq - fs)


def _feature_jacobian_pullback(config: KernelConfig, fmap: FeatureMap,
                               x: np.ndarray, fx: np.ndarray, m: np.ndarray) -> np.ndarray:
    """(-2/sigma2^2) * J_phi(x)^T m, with J_phi the feature Jacobian at x.

    Row j of J_phi is phi_j(x) * (-2/sigma1^2) (x - c_j), so the pullback
    contracts m against the per-center bump weights.
    """
    w = m * fx  # (M,)
    diff = x[None, :] - fmap.centers  # (M, 2)
    jt_m = (-2.0 / fmap.sigma1 ** 2) * (w @ diff)
    return (-2.0 / config.sigma2 ** 2) * jt_m


def decision_value_batch(config: KernelConfig, fmap: FeatureMap,
                         support_features: np.ndarray, coeffs: np.ndarray,
                         bias: float, pts: np.ndarray) -> np.ndarray:
    """Batch evaluation of sum_i coeffs_i * k(x, x_i) + bias over pts (n, 2)."""
    fq = featurize(fmap, np.atleast_2d(pts))
    k2 = kernel_between_features(config, fq, support_features)
    return k2 @ coeffs + bias


def decision_gradient_at(config: KernelConfig, fmap: FeatureMap,
                         support_features: np.ndarray, coeffs: np.ndarray,
                         x: np.ndarray) -> np.ndarray:
    """Analytic gradient of the kernel expansion at a single point.

    All support contributions share the feature Jacobian at x, so the sum is
    contracted in feature space before the single Jacobian pullback.
    """
    x = np.asarray(x, dtype=float)
    fq = featurize(fmap, x)
    k2 = kernel_between_features(config, fq, support_features)[0]  # (N,)
    v = coeffs * k2
    m = fq * np.sum(v) - v @ support_features
    return _feature_jacobian_pullback(config, fmap, x, fq, m)

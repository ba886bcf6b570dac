"""Biased-penalty kernel SVM trained by pairwise dual decomposition.

The solver handles per-class box constraints: safe-class coefficients are
capped at c_plus while unsafe-class coefficients get an escalating cap that
approximates a hard margin. After each solve the model is rejected unless
every unsafe training sample has a strictly negative decision value; the
unsafe cap is multiplied by 10 and the solve warm-started until that holds or
the cap limit is reached. The resulting decision function is the learned
barrier: positive is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import SAFE, UNSAFE, TrainingSet
from .kernelnet import (FeatureMap, KernelConfig, decision_gradient_at,
                        decision_value_batch, featurize,
                        kernel_between_features)

C_MINUS_CAP = 1e8

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _smo_fast = None
else:
    @_njit(cache=True, fastmath=False)
    def _smo_fast(gram, y, caps, diag, alphas, grad, neg_yg, tolerance, max_iters):
        """Compiled inner loop of solve_dual; mutates alphas/grad/neg_yg."""
        n = len(y)
        iters = 0
        for _ in range(max_iters):
            best_i = -1
            up_max = -1e300
            low_min = 1e300
            for k in range(n):
                if (y[k] > 0 and alphas[k] < caps[k] - 1e-12) or \
                   (y[k] < 0 and alphas[k] > 1e-12):
                    if neg_yg[k] > up_max:
                        up_max = neg_yg[k]
                        best_i = k
                if (y[k] > 0 and alphas[k] > 1e-12) or \
                   (y[k] < 0 and alphas[k] < caps[k] - 1e-12):
                    if neg_yg[k] < low_min:
                        low_min = neg_yg[k]
            if best_i < 0 or low_min >= 1e300 or up_max - low_min <= tolerance:
                break
            i = best_i
            best_j = -1
            best_gain = -1e300
            for k in range(n):
                if (y[k] > 0 and alphas[k] > 1e-12) or \
                   (y[k] < 0 and alphas[k] < caps[k] - 1e-12):
                    b_ik = neg_yg[i] - neg_yg[k]
                    if b_ik > 0.0:
                        a_ik = diag[i] + diag[k] - 2.0 * gram[i, k]
                        if a_ik < 1e-12:
                            a_ik = 1e-12
                        gain = b_ik * b_ik / a_ik
                        if gain > best_gain:
                            best_gain = gain
                            best_j = k
            if best_j < 0:
                break
            j = best_j
            violation = neg_yg[i] - neg_yg[j]
            curvature = diag[i] + diag[j] - 2.0 * gram[i, j]
            if curvature > 1e-12:
                t = violation / curvature
            else:
                t = 1e300
            lim_i = caps[i] - alphas[i] if y[i] > 0 else alphas[i]
            lim_j = alphas[j] if y[j] > 0 else caps[j] - alphas[j]
            if lim_i < t:
                t = lim_i
            if lim_j < t:
                t = lim_j
            alphas[i] += y[i] * t
            alphas[j] -= y[j] * t
            for k in range(n):
                d = t * y[k] * (gram[k, i] - gram[k, j])
                grad[k] += d
                neg_yg[k] -= y[k] * d
            iters += 1
        return iters


class DegenerateDataError(ValueError):
    """Training set does not contain both labels."""


class HardMarginInfeasibleError(RuntimeError):
    """Unsafe samples cannot all be driven to negative decision values."""


@dataclass(frozen=True)
class SvmConfig:
    c_plus: float = 10.0
    c_minus: float = 1e4          # initial unsafe-class cap; escalated as needed
    tolerance: float = 1e-6       # KKT violation stopping threshold
    max_iters: int = 5_000_000
    track_objective: bool = False

    def __post_init__(self):
        if not (self.c_minus >= self.c_plus > 1.0):
            raise ValueError("penalties must satisfy c_minus >= c_plus > 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class TrainingDiagnostics:
    iterations: int = 0
    negative_margin_violations: int = 0
    escalations: int = 0
    c_minus_final: float = 0.0
    objective_history: list[float] = field(default_factory=list)
    alphas_full: np.ndarray | None = None  # aligned with the training set, for warm starts


@dataclass
class BarrierModel:
    support_points: np.ndarray   # (S, 2)
    support_labels: np.ndarray   # (S,) in {+1, -1}
    alphas: np.ndarray           # (S,) dual coefficients > 0
    bias: float
    kernel_config: KernelConfig
    feature_map: FeatureMap
    diagnostics: TrainingDiagnostics
    support_features: np.ndarray = None  # (S, M), cached first-layer features

    def __post_init__(self):
        if self.support_features is None:
            self.support_features = featurize(self.feature_map, self.support_points)
        self._coeffs = self.alphas * self.support_labels

    def decision(self, x) -> float | np.ndarray:
        single = np.asarray(x).ndim == 1
        out = decision_value_batch(self.kernel_config, self.feature_map,
                                   self.support_features, self._coeffs,
                                   self.bias, np.asarray(x, dtype=float))
        return float(out[0]) if single else out

    def decision_gradient(self, x) -> np.ndarray:
        return decision_gradient_at(self.kernel_config, self.feature_map,
                                    self.support_features, self._coeffs,
                                    np.asarray(x, dtype=float))

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(f"# bias,{float(self.bias)!r}\n")
            f.write("x,y,label,alpha\n")
            for (x, y), lab, a in zip(self.support_points, self.support_labels, self.alphas):
                f.write(f"{float(x)!r},{float(y)!r},{int(lab)},{float(a)!r}\n")


def solve_dual(gram: np.ndarray, labels: np.ndarray, c_plus: float, c_minus: float,
               tolerance: float, max_iters: int,
               alphas0: np.ndarray | None = None,
               track_objective: bool = False):
    """Maximal-violating-pair coordinate ascent on the SVM dual.

    Minimizes 0.5 a'Qa - e'a with Q = yy' * K subject to y'a = 0 and
    0 <= a_i <= C_{y_i}. Returns (alphas, bias, iterations, objective_history).
    """
    n = len(labels)
    y = labels.astype(float)
    caps = np.where(y > 0, c_plus, c_minus)
    if alphas0 is not None:
        alphas = np.clip(alphas0.astype(float).copy(), 0.0, caps)
        grad = (gram * np.outer(y, y)) @ alphas - 1.0
    else:
        alphas = np.zeros(n)
        grad = -np.ones(n)
    history = []
    if track_objective:
        obj = float(alphas.sum() - 0.5 * alphas @ ((gram * np.outer(y, y)) @ alphas))
        history.append(obj)
    neg_yg = -y * grad
    diag = np.ascontiguousarray(np.diag(gram))
    if not track_objective and _smo_fast is not None:
        iters = int(_smo_fast(np.ascontiguousarray(gram), y, caps, diag,
                              alphas, grad, neg_yg, tolerance, max_iters))
        alphas = np.clip(alphas, 0.0, caps)
        bias = _solve_bias(alphas, y, caps, grad)
        return alphas, bias, iters, history
    iters = 0
    for iters in range(1, max_iters + 1):
        up = ((y > 0) & (alphas < caps - 1e-12)) | ((y < 0) & (alphas > 1e-12))
        low = ((y > 0) & (alphas > 1e-12)) | ((y < 0) & (alphas < caps - 1e-12))
        if not up.any() or not low.any():
            iters -= 1
            break
        i = int(np.argmax(np.where(up, neg_yg, -np.inf)))
        max_violation = neg_yg[i] - np.min(np.where(low, neg_yg, np.inf))
        if max_violation <= tolerance:
            iters -= 1
            break
        # Second-order partner selection: maximize the objective decrease
        # -b^2 / (2a) among partners that violate against i.
        b_ij = neg_yg[i] - neg_yg
        a_ij = np.maximum(diag[i] + diag - 2.0 * gram[:, i], 1e-12)
        cand = low & (b_ij > 0.0)
        gain = np.where(cand, b_ij * b_ij / a_ij, -np.inf)
        j = int(np.argmax(gain))
        violation = b_ij[j]
        curvature = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        t = violation / curvature if curvature > 1e-12 else np.inf
        lim_i = caps[i] - alphas[i] if y[i] > 0 else alphas[i]
        lim_j = alphas[j] if y[j] > 0 else caps[j] - alphas[j]
        t = min(t, lim_i, lim_j)
        alphas[i] += y[i] * t
        alphas[j] -= y[j] * t
        dgrad = t * y * (gram[:, i] - gram[:, j])
        grad += dgrad
        neg_yg -= y * dgrad
        if track_objective:
            obj += t * violation - 0.5 * t * t * curvature
            history.append(obj)
    alphas = np.clip(alphas, 0.0, caps)
    bias = _solve_bias(alphas, y, caps, grad)
    return alphas, bias, iters, history


def _solve_bias(alphas, y, caps, grad) -> float:
    neg_yg = -y * grad
    free = (alphas > 1e-9) & (alphas < caps - 1e-9)
    if free.any():
        return float(np.mean(neg_yg[free]))
    up = ((y > 0) & (alphas < caps - 1e-12)) | ((y < 0) & (alphas > 1e-12))
    low = ((y > 0) & (alphas > 1e-12)) | ((y < 0) & (alphas < caps - 1e-12))
    hi = np.max(neg_yg[up]) if up.any() else 0.0
    lo = np.min(neg_yg[low]) if low.any() else 0.0
    return float(0.5 * (hi + lo))


def compute_gram(kernel_config: KernelConfig, feature_map: FeatureMap,
                 positions: np.ndarray) -> np.ndarray:
    feats = featurize(feature_map, positions)
    return kernel_between_features(kernel_config, feats, feats)


def _conflicting_samples(data: TrainingSet) -> bool:
    seen = {(float(p[0]), float(p[1])) for p in data.unsafe_positions}
    return any((float(p[0]), float(p[1])) in seen for p in data.safe_positions)


def train(data: TrainingSet, svm_config: SvmConfig, kernel_config: KernelConfig,
          feature_map: FeatureMap, gram: np.ndarray | None = None,
          initial_alphas: np.ndarray | None = None) -> BarrierModel:
    """Train the barrier classifier with the unsafe-cap escalation loop.

    Raises DegenerateDataError on single-class data and
    HardMarginInfeasibleError when unsafe samples cannot all be separated
    (e.g. a point carrying both labels).
    """
    if len(data) < 2 or not data.has_both_labels():
        raise DegenerateDataError("degenerate training set: need both labels")
    if _conflicting_samples(data):
        raise HardMarginInfeasibleError(
            "hard-margin infeasible: coincident samples with opposite labels")
    if gram is None:
        gram = compute_gram(kernel_config, feature_map, data.positions)
    y = data.labels.astype(float)
    c_minus = svm_config.c_minus
    total_iters = 0
    escalations = 0
    history: list[float] = []
    alphas0 = initial_alphas
    while True:
        alphas, bias, iters, hist = solve_dual(
            gram, y, svm_config.c_plus, c_minus, svm_config.tolerance,
            svm_config.max_iters, alphas0=alphas0,
            track_objective=svm_config.track_objective)
        total_iters += iters
        history.extend(hist)
        margins = gram @ (alphas * y) + bias
        violations = int(np.sum(margins[y < 0] >= 0.0))
        if violations == 0:
            break
        if c_minus >= C_MINUS_CAP:
            raise HardMarginInfeasibleError(
                f"hard-margin infeasible: {violations} unsafe samples "
                f"nonnegative at cap {c_minus:g}")
        c_minus *= 10.0
        escalations += 1
        alphas0 = alphas  # warm start the escalated solve
    diag = TrainingDiagnostics(iterations=total_iters,
                               negative_margin_violations=violations,
                               escalations=escalations, c_minus_final=c_minus,
                               objective_history=history, alphas_full=alphas)
    sv = alphas > 1e-12
    feats = featurize(feature_map, data.positions[sv])
    return BarrierModel(support_points=data.positions[sv].copy(),
                        support_labels=data.labels[sv].copy(),
                        alphas=alphas[sv].copy(), bias=bias,
                        kernel_config=kernel_config, feature_map=feature_map,
                        diagnostics=diag, support_features=feats)


def decision(model: BarrierModel, x):
    return model.decision(x)


def decision_gradient(model: BarrierModel, x) -> np.ndarray:
    return model.decision_gradient(x)

"""Trajectory similarity: correlation coefficient and discrete Frechet distance.

Trajectories with different step counts are first resampled at equal
arc-length fractions so the metrics are parameterization-robust. The
correlation of two 2D trajectories is the mean of the per-coordinate Pearson
coefficients of the resampled sequences.
"""

from __future__ import annotations

import numpy as np

DEFAULT_RESAMPLE = 256


def _as_polyline(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("polyline must be an (n, 2) array")
    if len(p) < 2:
        raise ValueError("polyline needs at least 2 points")
    if not np.all(np.isfinite(p)):
        raise ValueError("polyline has non-finite coordinates")
    return p


def resample_by_arclength(points, m: int) -> np.ndarray:
    """m points at equal arc-length fractions; endpoints preserved exactly."""
    if m < 2:
        raise ValueError("need m >= 2 resample points")
    p = _as_polyline(points)
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0.0:
        return np.tile(p[0], (m, 1))
    targets = np.linspace(0.0, total, m)
    out = np.stack([np.interp(targets, s, p[:, 0]),
                    np.interp(targets, s, p[:, 1])], axis=-1)
    out[0] = p[0]
    out[-1] = p[-1]
    return out


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    sa = np.std(a)
    sb = np.std(b)
    if sa == 0.0 or sb == 0.0:
        return 1.0 if sa == sb == 0.0 else 0.0
    return float(np.corrcoef(a, b)[0, 1])


def correlation(a, b, m: int = DEFAULT_RESAMPLE) -> float:
    """Mean per-coordinate Pearson correlation after arc-length resampling.

    A constant coordinate sequence correlates 1 with another constant
    sequence and 0 otherwise (avoids the 0/0 case).
    """
    ra = resample_by_arclength(a, m)
    rb = resample_by_arclength(b, m)
    return 0.5 * (_pearson(ra[:, 0], rb[:, 0]) + _pearson(ra[:, 1], rb[:, 1]))


def compare_trajectories(a, b, m: int = DEFAULT_RESAMPLE) -> tuple[float, float]:
    """(correlation, Frechet distance) with both inputs resampled to m points."""
    ra = resample_by_arclength(a, m)
    rb = resample_by_arclength(b, m)
    return correlation(ra, rb, m), frechet_distance(ra, rb)


def frechet_distance(a, b) -> float:
    """Discrete Frechet distance by dynamic programming over the coupling
    lattice; O(|a| |b|)."""
    p = np.asarray(a, dtype=float)
    q = np.asarray(b, dtype=float)
    d = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=-1)
    n, m = d.shape
    ca = np.empty((n, m))
    ca[0, 0] = d[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        for j in range(1, m):
            ca[i, j] = max(min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]),
                           d[i, j])
    return float(ca[-1, -1])

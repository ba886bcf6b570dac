"""Simulated 2D LiDAR over scenario geometry.

Beams are cast from the robot position at uniform angular increments; each
beam reports the exact distance to the first obstacle-boundary intersection,
or no return if nothing lies within range. No-return beams are flagged by an
explicit hit mask rather than a sentinel range value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import (Circle, Ellipse, Polygon, Scenario, SensorConfig,
                          inside_any_obstacle)


class SensorError(ValueError):
    """Scan requested from a pose where the sensor model is undefined."""


@dataclass(frozen=True)
class LaserScan:
    pose: tuple[float, float]
    timestamp: float
    ranges: np.ndarray       # (N,) meters; only valid where hit is True
    hit: np.ndarray          # (N,) bool; False marks a no-return beam
    beam_angles: np.ndarray  # (N,) radians, world frame

    @property
    def num_beams(self) -> int:
        return len(self.ranges)

    def finite_indices(self) -> np.ndarray:
        return np.flatnonzero(self.hit)


def _ray_circle(origin, directions, circle: Circle) -> np.ndarray:
    """First positive ray parameter hitting the circle, inf if none. Vectorized
    over unit direction rows."""
    oc = origin - np.asarray(circle.center, dtype=float)
    b = directions @ oc
    c = oc @ oc - circle.radius ** 2
    disc = b * b - c
    t = np.full(len(directions), np.inf)
    ok = disc >= 0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    near = np.where(t0 > 1e-12, t0, np.where(t1 > 1e-12, t1, np.inf))
    t[ok] = near[ok]
    return t


def _ray_ellipse(origin, directions, ellipse: Ellipse) -> np.ndarray:
    """Ray-ellipse hits via the quadratic in the de-rotated frame. The frame
    change is rigid, so the ray parameter stays metric."""
    c, s = math.cos(ellipse.rotation), math.sin(ellipse.rotation)
    rot = np.array([[c, s], [-s, c]])
    o = rot @ (origin - np.asarray(ellipse.center, dtype=float))
    d = directions @ rot.T
    a, b = ellipse.semi_axes
    ox, oy = o[0] / a, o[1] / b
    dx, dy = d[:, 0] / a, d[:, 1] / b
    qa = dx * dx + dy * dy
    qb = ox * dx + oy * dy
    qc = ox * ox + oy * oy - 1.0
    disc = qb * qb - qa * qc
    t = np.full(len(directions), np.inf)
    ok = disc >= 0
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (-qb - sq) / qa
        t1 = (-qb + sq) / qa
    near = np.where(t0 > 1e-12, t0, np.where(t1 > 1e-12, t1, np.inf))
    t[ok] = near[ok]
    return t


def _ray_polygon(origin, directions, poly: Polygon) -> np.ndarray:
    """Minimum positive ray parameter over per-edge segment intersections."""
    v = np.asarray(poly.vertices, dtype=float)
    v0 = v
    v1 = np.roll(v, -1, axis=0)
    e = v1 - v0                                   # (E,2)
    w = v0 - origin                               # (E,2)
    # Solve origin + t*d = v0 + s*e for each (beam, edge) pair by Cramer.
    denom = directions[:, 0][:, None] * (-e[:, 1][None, :]) \
        - directions[:, 1][:, None] * (-e[:, 0][None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0][None, :] * (-e[:, 1][None, :])
             - w[:, 1][None, :] * (-e[:, 0][None, :])) / denom
        s = (directions[:, 0][:, None] * w[:, 1][None, :]
             - directions[:, 1][:, None] * w[:, 0][None, :]) / denom
    valid = (np.abs(denom) > 1e-15) & (t > 1e-12) & (s >= 0.0) & (s <= 1.0)
    t = np.where(valid, t, np.inf)
    return np.min(t, axis=1)


_CASTERS = {Circle: _ray_circle, Ellipse: _ray_ellipse, Polygon: _ray_polygon}


def scan(scenario: Scenario, pose, config: SensorConfig,
         rng: np.random.Generator | None = None,
         timestamp: float = 0.0) -> LaserScan:
    """Cast all beams from pose and return the resulting sweep.

    Gaussian range noise (config.noise_sigma) is added to finite returns and
    clamped to (0, max_range]. Raises SensorError for poses inside an
    obstacle, where the sensor model is undefined.
    """
    pose = np.asarray(pose, dtype=float)
    if inside_any_obstacle(scenario, pose):
        raise SensorError(f"scan pose {tuple(pose)} lies inside an obstacle")
    n = config.num_beams
    angles = config.fov_start + config.theta_res * np.arange(n)
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    t = np.full(n, np.inf)
    for ob in scenario.obstacles:
        t = np.minimum(t, _CASTERS[type(ob)](pose, directions, ob))
    hit = t <= config.max_range
    ranges = np.where(hit, t, np.nan)
    if config.noise_sigma > 0 and hit.any():
        if rng is None:
            rng = np.random.default_rng()
        noise = rng.normal(0.0, config.noise_sigma, size=n)
        ranges = np.where(hit, np.clip(ranges + noise, 1e-9, config.max_range), ranges)
    return LaserScan(pose=(float(pose[0]), float(pose[1])), timestamp=timestamp,
                     ranges=ranges, hit=hit, beam_angles=angles)


def scan_to_world(scan: LaserScan, beam_index: int, range_override: float) -> np.ndarray:
    """Map a (beam, range) pair to world coordinates from the scan pose."""
    if not 0 <= beam_index < scan.num_beams:
        raise IndexError(f"beam index {beam_index} out of range")
    if range_override <= 0:
        raise ValueError("range_override must be positive")
    theta = scan.beam_angles[beam_index]
    return np.asarray(scan.pose) + range_override * np.array([math.cos(theta), math.sin(theta)])

"""2D workspace, obstacle geometry, and ground-truth signed distance.

The workspace is an axis-aligned rectangle containing circle, ellipse, and
polygon obstacles. The true signed distance to the nearest obstacle boundary
(positive outside, negative inside) serves as the ground-truth barrier
function, both directly and sampled onto a grid with bilinear interpolation.
Scenario files (TOML) bundle the geometry with sensor/learner/control
hyperparameters.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Signed distance reported when a scenario has no obstacles. Finite so that
# downstream arithmetic (grids, QP constraints) stays well defined.
EMPTY_DISTANCE = 1e9


class ScenarioError(ValueError):
    """Scenario file failed to parse or violated a structural invariant."""


@dataclass(frozen=True)
class Workspace:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ScenarioError("workspace bounds must satisfy x_min < x_max and y_min < y_max")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


def default_workspace() -> Workspace:
    """3.2 x 2.0 m arena centered on the origin."""
    return Workspace(-1.6, 1.6, -1.0, 1.0)


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ScenarioError("circle radius must be positive")

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        d = np.hypot(pts[..., 0] - self.center[0], pts[..., 1] - self.center[1])
        return d - self.radius

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.signed_distance(pts) < 0.0


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    rotation: float = 0.0

    def __post_init__(self):
        if self.semi_axes[0] <= 0 or self.semi_axes[1] <= 0:
            raise ScenarioError("ellipse semi-axes must be positive")

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        """Rotate/translate world points into the axis-aligned ellipse frame."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        dx = pts[..., 0] - self.center[0]
        dy = pts[..., 1] - self.center[1]
        return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        a, b = self.semi_axes
        q = self.to_local(np.atleast_2d(np.asarray(pts, dtype=float)))
        # Work in the first quadrant; distance is symmetric.
        px = np.abs(q[:, 0])
        py = np.abs(q[:, 1])
        t = _ellipse_project(px, py, a, b)
        bx = a * np.cos(t)
        by = b * np.sin(t)
        dist = np.hypot(px - bx, py - by)
        inside = (q[:, 0] / a) ** 2 + (q[:, 1] / b) ** 2 < 1.0
        out = np.where(inside, -dist, dist)
        if np.asarray(pts).ndim == 1:
            return out[0]
        return out

    def contains(self, pts: np.ndarray) -> np.ndarray:
        a, b = self.semi_axes
        q = self.to_local(np.asarray(pts, dtype=float))
        return (q[..., 0] / a) ** 2 + (q[..., 1] / b) ** 2 < 1.0


def _ellipse_project(px: np.ndarray, py: np.ndarray, a: float, b: float,
                     n_init: int = 64, tol: float = 1e-10, max_iter: int = 60) -> np.ndarray:
    """Boundary parameter t minimizing |(px,py) - (a cos t, b sin t)|.

    Newton iteration on the stationarity condition of the squared distance,
    seeded from the best of n_init uniformly spaced boundary samples. Points
    are assumed folded into the first quadrant, so t in [0, pi/2].
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    ts = np.linspace(0.0, math.pi / 2, n_init)
    bx = a * np.cos(ts)[:, None]
    by = b * np.sin(ts)[:, None]
    d2 = (px[None, :] - bx) ** 2 + (py[None, :] - by) ** 2
    t = ts[np.argmin(d2, axis=0)]
    for _ in range(max_iter):
        ct, st = np.cos(t), np.sin(t)
        ex = a * ct - px
        ey = b * st - py
        # f(t) = d/dt of half squared distance; solve f(t) = 0.
        f = -a * st * ex + b * ct * ey
        fp = -a * ct * ex + a * a * st * st - b * st * ey + b * b * ct * ct
        fp = np.where(np.abs(fp) < 1e-300, 1e-300, fp)
        step = f / fp
        t = np.clip(t - step, 0.0, math.pi / 2)
        if np.max(np.abs(step)) < tol:
            break
    return t


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ScenarioError("polygon needs at least 3 vertices")
        if _polygon_self_intersects(np.asarray(self.vertices, dtype=float)):
            raise ScenarioError("polygon must be simple (non-self-intersecting)")

    def _edges(self):
        v = np.asarray(self.vertices, dtype=float)
        return v, np.roll(v, -1, axis=0)

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        v0, v1 = self._edges()
        e = v1 - v0                                    # (E,2)
        diff = p[:, None, :] - v0[None, :, :]          # (P,E,2)
        e_len2 = np.maximum(np.einsum("ij,ij->i", e, e), 1e-300)
        t = np.clip(np.einsum("pej,ej->pe", diff, e) / e_len2, 0.0, 1.0)
        closest = v0[None, :, :] + t[..., None] * e[None, :, :]
        dist = np.min(np.linalg.norm(p[:, None, :] - closest, axis=-1), axis=1)
        out = np.where(self.contains(p), -dist, dist)
        if np.asarray(pts).ndim == 1:
            return out[0]
        return out

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Even-odd crossing test, vectorized over query points."""
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        v0, v1 = self._edges()
        x, y = p[:, 0][:, None], p[:, 1][:, None]
        y0, y1 = v0[:, 1][None, :], v1[:, 1][None, :]
        x0, x1 = v0[:, 0][None, :], v1[:, 0][None, :]
        cond = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_int = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        crossings = np.sum(cond & (x < x_int), axis=1)
        inside = (crossings % 2).astype(bool)
        if np.asarray(pts).ndim == 1:
            return inside[0]
        return inside


def _polygon_self_intersects(v: np.ndarray) -> bool:
    n = len(v)
    segs = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared-endpoint neighbors
            if _segments_cross(*segs[i], *segs[j]):
                return True
    return False


def _segments_cross(a0, a1, b0, b1) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    d1 = orient(a0, a1, b0)
    d2 = orient(a0, a1, b1)
    d3 = orient(b0, b1, a0)
    d4 = orient(b0, b1, a1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


Obstacle = Circle | Ellipse | Polygon


@dataclass(frozen=True)
class SensorConfig:
    num_beams: int = 360
    max_range: float = 1.0
    noise_sigma: float = 0.0
    fov_start: float = 0.0
    fov_end: float = 2.0 * math.pi

    def __post_init__(self):
        if self.num_beams < 3:
            raise ScenarioError("sensor needs at least 3 beams")
        if self.max_range <= 0:
            raise ScenarioError("sensor max_range must be positive")
        if self.noise_sigma < 0:
            raise ScenarioError("sensor noise_sigma must be nonnegative")

    @property
    def theta_res(self) -> float:
        return (self.fov_end - self.fov_start) / self.num_beams


@dataclass(frozen=True)
class LearnerConfig:
    grid_spacing: float | None = None   # None: workspace max extent / 20
    sigma1: float | None = None         # None: 2 * grid_spacing
    sigma2: float = 1.0
    c_plus: float = 10.0
    c_minus_init: float = 1e4
    kkt_tolerance: float = 1e-6
    max_iters: int = 5_000_000
    offset_d: float = 0.1
    dedup_tol: float = 0.02
    vantage_spacing: float = 0.4

    def __post_init__(self):
        if self.grid_spacing is not None and self.grid_spacing <= 0:
            raise ScenarioError("learner grid_spacing must be positive")
        if self.sigma1 is not None and self.sigma1 <= 0:
            raise ScenarioError("learner sigma1 must be positive")
        if self.sigma2 <= 0:
            raise ScenarioError("learner sigma2 must be positive")
        if not (self.c_minus_init >= self.c_plus > 1.0):
            raise ScenarioError("learner penalties must satisfy c_minus_init >= c_plus > 1")
        if self.kkt_tolerance <= 0:
            raise ScenarioError("learner kkt_tolerance must be positive")
        if self.offset_d <= 0:
            raise ScenarioError("learner offset_d must be positive")
        if self.dedup_tol < 0:
            raise ScenarioError("learner dedup_tol must be nonnegative")


@dataclass(frozen=True)
class ControlConfig:
    delta: float = 1.0      # nominal speed [m/s]
    gamma: float = 1.0      # linear class-K gain [1/s]
    dt: float = 0.02        # Euler step [s]
    u_max: float | None = None

    def __post_init__(self):
        if self.delta <= 0 or self.gamma <= 0 or self.dt <= 0:
            raise ScenarioError("control delta, gamma, dt must all be positive")


@dataclass(frozen=True)
class Scenario:
    workspace: Workspace
    obstacles: tuple[Obstacle, ...]
    x_start: tuple[tuple[float, float], ...]
    x_goal: tuple[float, float]
    goal_radius: float = 0.1
    sensor: SensorConfig = field(default_factory=SensorConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    control: ControlConfig = field(default_factory=ControlConfig)

    def __post_init__(self):
        ws = self.workspace
        gx, gy = self.x_goal
        if not (ws.x_min < gx < ws.x_max and ws.y_min < gy < ws.y_max):
            raise ScenarioError("goal must lie strictly inside the workspace")
        if self.goal_radius <= 0:
            raise ScenarioError("goal_radius must be positive")
        if self.obstacles and true_signed_distance(self, np.asarray(self.x_goal)) <= 0:
            raise ScenarioError("goal must lie outside every obstacle")

    def grid_spacing(self) -> float:
        gs = self.learner.grid_spacing
        if gs is None:
            gs = max(self.workspace.width, self.workspace.height) / 20.0
        return gs

    def sigma1(self) -> float:
        s1 = self.learner.sigma1
        if s1 is None:
            s1 = 2.0 * self.grid_spacing()
        return s1


def true_signed_distance(scenario: Scenario, x) -> float | np.ndarray:
    """Signed distance to the nearest obstacle boundary (positive = safe).

    Accepts a single point (2,) or a batch (n, 2). Empty scenarios return the
    EMPTY_DISTANCE clamp.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if not scenario.obstacles:
        out = np.full(len(pts), EMPTY_DISTANCE)
    else:
        dists = np.stack([ob.signed_distance(pts) for ob in scenario.obstacles])
        out = np.min(dists, axis=0)
    return float(out[0]) if single else out


def inside_any_obstacle(scenario: Scenario, x) -> bool | np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if not scenario.obstacles:
        out = np.zeros(len(pts), dtype=bool)
    else:
        out = np.any(np.stack([ob.contains(pts) for ob in scenario.obstacles]), axis=0)
    return bool(out[0]) if single else out


@dataclass
class SignedDistanceGrid:
    origin: tuple[float, float]
    spacing: float
    values: np.ndarray  # (ny, nx), row i = y index

    def __post_init__(self):
        self._gy, self._gx = np.gradient(self.values, self.spacing)

    def _frac_index(self, x):
        p = np.atleast_2d(np.asarray(x, dtype=float))
        ny, nx = self.values.shape
        fx = np.clip((p[:, 0] - self.origin[0]) / self.spacing, 0.0, nx - 1 - 1e-12)
        fy = np.clip((p[:, 1] - self.origin[1]) / self.spacing, 0.0, ny - 1 - 1e-12)
        return fx, fy

    def _bilinear(self, arr: np.ndarray, fx, fy):
        i0 = fx.astype(int)
        j0 = fy.astype(int)
        tx = fx - i0
        ty = fy - j0
        v00 = arr[j0, i0]
        v10 = arr[j0, i0 + 1]
        v01 = arr[j0 + 1, i0]
        v11 = arr[j0 + 1, i0 + 1]
        return (v00 * (1 - tx) * (1 - ty) + v10 * tx * (1 - ty)
                + v01 * (1 - tx) * ty + v11 * tx * ty)

    def interpolate(self, x) -> float | np.ndarray:
        single = np.asarray(x).ndim == 1
        fx, fy = self._frac_index(x)
        out = self._bilinear(self.values, fx, fy)
        return float(out[0]) if single else out

    def gradient(self, x) -> np.ndarray:
        """Central-difference gradient of the grid, bilinearly interpolated."""
        single = np.asarray(x).ndim == 1
        fx, fy = self._frac_index(x)
        gx = self._bilinear(self._gx, fx, fy)
        gy = self._bilinear(self._gy, fx, fy)
        out = np.stack([gx, gy], axis=-1)
        return out[0] if single else out


def build_sdf_grid(scenario: Scenario, spacing: float) -> SignedDistanceGrid:
    """Sample the true signed distance over the workspace on a uniform grid."""
    ws = scenario.workspace
    if spacing <= 0:
        raise ScenarioError("grid spacing must be positive")
    if spacing > min(ws.width, ws.height) / 10.0:
        raise ScenarioError("grid spacing too coarse for the workspace")
    nx = int(math.ceil(ws.width / spacing)) + 1
    ny = int(math.ceil(ws.height / spacing)) + 1
    xs = ws.x_min + spacing * np.arange(nx)
    ys = ws.y_min + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    vals = true_signed_distance(scenario, pts)
    return SignedDistanceGrid(origin=(ws.x_min, ws.y_min), spacing=spacing,
                              values=np.asarray(vals).reshape(ny, nx))


# --- scenario file loading -------------------------------------------------

def _pair(v, what: str) -> tuple[float, float]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ScenarioError(f"{what} must be a [x, y] pair")
    return (float(v[0]), float(v[1]))


def _obstacle_from_table(tab: dict, idx: int) -> Obstacle:
    kind = tab.get("kind")
    try:
        if kind == "circle":
            return Circle(center=_pair(tab["center"], "obstacle center"),
                          radius=float(tab["radius"]))
        if kind == "ellipse":
            return Ellipse(center=_pair(tab["center"], "obstacle center"),
                           semi_axes=_pair(tab["semi_axes"], "obstacle semi_axes"),
                           rotation=float(tab.get("rotation", 0.0)))
        if kind == "polygon":
            verts = tuple(_pair(v, "polygon vertex") for v in tab["vertices"])
            return Polygon(vertices=verts)
    except KeyError as exc:
        raise ScenarioError(f"obstacle #{idx}: missing field {exc}") from exc
    raise ScenarioError(f"obstacle #{idx}: unknown kind {kind!r}")


_CONFIG_TABLES = {
    "sensor": SensorConfig,
    "learner": LearnerConfig,
    "control": ControlConfig,
}


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a Scenario from a parsed scenario document."""
    try:
        ws_tab = doc["workspace"]
        workspace = Workspace(float(ws_tab["x_min"]), float(ws_tab["x_max"]),
                              float(ws_tab["y_min"]), float(ws_tab["y_max"]))
        goal = _pair(doc["goal"], "goal")
    except KeyError as exc:
        raise ScenarioError(f"missing required field {exc}") from exc
    obstacles = tuple(_obstacle_from_table(t, i)
                      for i, t in enumerate(doc.get("obstacle", [])))
    starts_raw = doc.get("start", [])
    if starts_raw and isinstance(starts_raw[0], (int, float)):
        starts_raw = [starts_raw]
    starts = tuple(_pair(s, "start") for s in starts_raw)
    configs = {}
    for key, cls in _CONFIG_TABLES.items():
        tab = doc.get(key, {})
        known = {f for f in cls.__dataclass_fields__}
        bad = set(tab) - known
        if bad:
            raise ScenarioError(f"[{key}] has unknown keys: {sorted(bad)}")
        configs[key] = cls(**tab)
    return Scenario(workspace=workspace, obstacles=obstacles, x_start=starts,
                    x_goal=goal, goal_radius=float(doc.get("goal_radius", 0.1)),
                    sensor=configs["sensor"], learner=configs["learner"],
                    control=configs["control"])


def parse_scenario_doc(path) -> dict:
    """Parse a scenario file into its raw document dict (no validation)."""
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: parse error: {exc}") from exc


def apply_overrides(doc: dict, overrides: dict[str, str]) -> dict:
    """Apply dotted key=value overrides (e.g. 'control.gamma': '2.0') onto a
    raw scenario document. Values are parsed as TOML literals."""
    for dotted, raw in overrides.items():
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioError(f"override {dotted}={raw}: bad value") from exc
        node = doc
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ScenarioError(f"override {dotted}: {key} is not a table")
        node[leaf] = value
    return doc


def load_scenario(path, overrides: dict[str, str] | None = None) -> Scenario:
    """Load and validate a TOML scenario file, with optional overrides."""
    doc = parse_scenario_doc(path)
    if overrides:
        doc = apply_overrides(doc, overrides)
    try:
        return scenario_from_dict(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc

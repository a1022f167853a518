"""Spatial model samplers and queries.

The scene is a disk window centred on the origin (the typical user under the
Palm setup).  Roads are an isotropic line process driven by a Poisson process
on the cylinder R x (0, pi) with intensity lambda_l / pi: a point (r, theta)
is the line at signed distance r from the origin with direction angle theta.
Vehicles are 1-D Poisson processes of linear intensity mu on each road chord,
base stations and users are planar Poisson processes, and the sidelink
association region is the union of closed disks of radius rho around vehicles.

All samplers take an explicit numpy Generator and are pure given it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EmptySetError(ValueError):
    """Raised when an operation needs at least one point and got none."""


ON_LINE_TOL = 1e-12  # km; vehicles must sit on their road to this tolerance


@dataclass(frozen=True)
class Point2:
    x: float
    y: float


@dataclass(frozen=True)
class Line:
    """Road parameterised by signed displacement r and angle theta in [0, pi)."""
    r: float
    theta: float


@dataclass
class LineSet:
    """Road realization inside a disk window; array-backed for speed."""

    r: np.ndarray            # signed displacements, |r| <= window_radius
    theta: np.ndarray        # angles in [0, pi)
    window_radius: float

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)

    def __len__(self) -> int:
        return self.r.size

    def __getitem__(self, i: int) -> Line:
        return Line(float(self.r[i]), float(self.theta[i]))

    @property
    def lines(self) -> list[Line]:
        return [self[i] for i in range(len(self))]


@dataclass
class VehicleSet:
    """Vehicles tied to roads: planar position, owning line, signed offset
    along the line, and motion direction (+1/-1 along the line vector)."""

    x: np.ndarray
    y: np.ndarray
    line_index: np.ndarray   # int, indexes into the owning LineSet
    offset: np.ndarray       # km along the line, signed
    direction: np.ndarray    # +1 or -1

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.line_index = np.asarray(self.line_index, dtype=np.int64)
        self.offset = np.asarray(self.offset, dtype=float)
        self.direction = np.asarray(self.direction, dtype=np.int64)

    def __len__(self) -> int:
        return self.x.size

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y]) if len(self) else np.empty((0, 2))

    @staticmethod
    def empty() -> "VehicleSet":
        z = np.empty(0)
        return VehicleSet(z, z, np.empty(0, dtype=np.int64), z, np.empty(0, dtype=np.int64))


@dataclass
class Realization:
    """One sampled network: roads, vehicles, base stations, window, seed."""

    lines: LineSet
    vehicles: VehicleSet
    base_stations: np.ndarray  # (n, 2)
    window_radius: float
    seed: int


def sample_lines(lambda_l, window_radius, rng) -> LineSet:
    """Sample the roads hitting the disk of radius ``window_radius``.

    The restriction of the cylinder process to |r| < R has 2 * lambda_l * R
    expected points; displacements are uniform on (-R, R) and angles uniform
    on (0, pi), independently.
    """
    if window_radius <= 0:
        raise ValueError("window_radius must be positive")
    n = rng.poisson(2.0 * lambda_l * window_radius) if lambda_l > 0 else 0
    r = rng.uniform(-window_radius, window_radius, n)
    theta = rng.uniform(0.0, math.pi, n)
    return LineSet(r, theta, float(window_radius))


def chord_half_length(r, window_radius):
    """Half-length sqrt(R^2 - r^2) of the window chord cut by a line at
    displacement r.  Accepts scalars or arrays; |r| must not exceed R."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(np.abs(r_arr) > window_radius):
        raise ValueError("|r| exceeds window_radius")
    out = np.sqrt(np.maximum(window_radius * window_radius - r_arr * r_arr, 0.0))
    return float(out) if np.isscalar(r) or out.ndim == 0 else out


def _positions_on_lines(lines: LineSet, line_index, offset):
    """Planar position of points at signed ``offset`` along their lines.

    A line (r, theta) is the set r * n + t * e with direction
    e = (cos theta, sin theta) and unit normal n = (-sin theta, cos theta).
    """
    th = lines.theta[line_index]
    r = lines.r[line_index]
    cos_t, sin_t = np.cos(th), np.sin(th)
    x = -r * sin_t + offset * cos_t
    y = r * cos_t + offset * sin_t
    return x, y


def sample_vehicles(lines: LineSet, mu, rng, extend=0.0) -> VehicleSet:
    """Place Poisson(mu) vehicles per km on every window chord.

    ``extend`` widens each chord by that many km at both ends; the motion
    machinery uses it so that advancing vehicles does not deplete the window
    boundary.  Motion directions are +1/-1 with probability one half.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if len(lines) == 0 or mu == 0:
        return VehicleSet.empty()
    half = chord_half_length(lines.r, lines.window_radius) + extend
    counts = rng.poisson(2.0 * mu * half)
    line_index = np.repeat(np.arange(len(lines)), counts)
    offset = rng.uniform(-1.0, 1.0, line_index.size) * np.repeat(half, counts)
    direction = rng.choice(np.array([-1, 1]), size=line_index.size)
    x, y = _positions_on_lines(lines, line_index, offset)
    return VehicleSet(x, y, line_index, offset, direction)


def sample_planar_ppp(lam, window_radius, rng) -> np.ndarray:
    """Poisson(lam * pi * R^2) points uniform on the disk; returns (n, 2)."""
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    n = rng.poisson(lam * math.pi * window_radius * window_radius) if lam > 0 else 0
    radius = window_radius * np.sqrt(rng.random(n))
    angle = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def _as_xy(points) -> np.ndarray:
    if isinstance(points, VehicleSet):
        return points.positions
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim == 1 and arr.dtype == object:
        arr = np.array([[p.x, p.y] for p in points], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        arr = np.array([[p.x, p.y] for p in points], dtype=float)
    return arr


def nearest(points, query: Point2):
    """Point of ``points`` closest to ``query`` and its distance.

    Ties break toward the lowest index (they have probability zero under the
    continuous model; the rule only stabilises tests).
    """
    xy = _as_xy(points)
    if xy.shape[0] == 0:
        raise EmptySetError("nearest() needs at least one point")
    d = np.hypot(xy[:, 0] - query.x, xy[:, 1] - query.y)
    i = int(np.argmin(d))  # argmin returns the first minimiser
    return Point2(float(xy[i, 0]), float(xy[i, 1])), float(d[i])


def in_vehicle_region(query: Point2, vehicles: VehicleSet, rho) -> bool:
    """True iff some vehicle lies within the closed ball of radius rho."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if len(vehicles) == 0:
        return False
    d2 = (vehicles.x - query.x) ** 2 + (vehicles.y - query.y) ** 2
    return bool(np.min(d2) <= rho * rho)


def advance_vehicles(vehicles: VehicleSet, lines: LineSet, speed, t) -> VehicleSet:
    """Move every vehicle by direction * speed * t along its line.

    Vehicles whose new offset leaves their window chord are dropped; the rest
    get their planar positions recomputed.
    """
    if speed < 0 or t < 0:
        raise ValueError("speed and t must be nonnegative")
    if len(vehicles) == 0 or speed == 0 or t == 0:
        return VehicleSet(vehicles.x.copy(), vehicles.y.copy(),
                          vehicles.line_index.copy(), vehicles.offset.copy(),
                          vehicles.direction.copy())
    new_offset = vehicles.offset + vehicles.direction * speed * t
    half = chord_half_length(lines.r[vehicles.line_index], lines.window_radius)
    keep = np.abs(new_offset) <= half
    line_index = vehicles.line_index[keep]
    offset = new_offset[keep]
    x, y = _positions_on_lines(lines, line_index, offset)
    return VehicleSet(x, y, line_index, offset, vehicles.direction[keep])


def sample_realization(cfg, window_radius, seed) -> Realization:
    """Sample roads, vehicles and base stations for one network draw."""
    rng = np.random.default_rng(seed)
    lines = sample_lines(cfg.lambda_l, window_radius, rng)
    vehicles = sample_vehicles(lines, cfg.mu, rng)
    base_stations = sample_planar_ppp(cfg.lambda_b, window_radius, rng)
    return Realization(lines, vehicles, base_stations, float(window_radius), int(seed))


def realization_to_dict(real: Realization) -> dict:
    """JSON-ready document for debugging and regression fixtures."""
    return {
        "window_radius": real.window_radius,
        "seed": real.seed,
        "lines": [[float(r), float(th)] for r, th in zip(real.lines.r, real.lines.theta)],
        "vehicles": [
            [float(x), float(y), int(li), float(off), int(di)]
            for x, y, li, off, di in zip(
                real.vehicles.x, real.vehicles.y, real.vehicles.line_index,
                real.vehicles.offset, real.vehicles.direction)
        ],
        "base_stations": [[float(x), float(y)] for x, y in np.atleast_2d(real.base_stations)]
        if len(real.base_stations) else [],
    }


def realization_from_dict(doc: dict) -> Realization:
    lines_arr = np.array(doc["lines"], dtype=float).reshape(-1, 2)
    lines = LineSet(lines_arr[:, 0], lines_arr[:, 1], float(doc["window_radius"]))
    veh_arr = np.array(doc["vehicles"], dtype=float).reshape(-1, 5)
    vehicles = VehicleSet(veh_arr[:, 0], veh_arr[:, 1],
                          veh_arr[:, 2].astype(np.int64), veh_arr[:, 3],
                          veh_arr[:, 4].astype(np.int64))
    bs = np.array(doc["base_stations"], dtype=float).reshape(-1, 2)
    return Realization(lines, vehicles, bs, float(doc["window_radius"]), int(doc["seed"]))

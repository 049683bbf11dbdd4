"""Uniform clamped cubic B-spline trajectories in matrix form.

A trajectory is N control points with uniform knot spacing dt and tripled
end control points, which pins position and zeroes velocity/acceleration at
both ends. Segment i (i = 0..N-4) spans t in [i*dt, (i+1)*dt) and depends on
control points q_i..q_{i+3} only, so every segment lies in the convex hull
of its four control points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain

DEGREE = 3

# Fixed basis matrix of the uniform cubic segment: p(u) = [1 u u^2 u^3] M Q.
BASIS_M = (1.0 / 6.0) * np.array([
    [1.0, 4.0, 1.0, 0.0],
    [-3.0, 0.0, 3.0, 0.0],
    [3.0, -6.0, 3.0, 0.0],
    [-1.0, 3.0, -3.0, 1.0],
])

# Value at a knot is m^T Q with m the first basis row.
KNOT_WEIGHTS = BASIS_M[0]  # (1/6)[1, 4, 1, 0]

# Third-derivative (jerk) weights: b^T Q / dt^3 per segment.
JERK_WEIGHTS = np.array([-1.0, 3.0, -3.0, 1.0])

# Quadratic basis matrix of the derivative spline over the difference
# control points (q_k - q_{k-1}) / dt.
BASIS_M2 = 0.5 * np.array([
    [1.0, 1.0, 0.0],
    [-2.0, 2.0, 0.0],
    [1.0, -2.0, 1.0],
])


@dataclass(frozen=True)
class SplineTrajectory:
    """Immutable uniform clamped cubic B-spline in the plane."""

    control_points: np.ndarray  # (N, 2)
    dt_knot: float
    degree: int = DEGREE

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        object.__setattr__(self, "control_points", pts)
        if self.degree != DEGREE:
            raise ValueError("only cubic trajectories are supported")
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"control points must be (N, 2), got {pts.shape}")
        if len(pts) < 8:
            raise ValueError(f"need at least 8 control points, got {len(pts)}")
        if self.dt_knot <= 0.0:
            raise ValueError(f"knot spacing must be positive, got {self.dt_knot}")
        if not (np.array_equal(pts[0], pts[1]) and np.array_equal(pts[1], pts[2])):
            raise ValueError("first three control points must coincide (rest start)")
        if not (np.array_equal(pts[-1], pts[-2]) and np.array_equal(pts[-2], pts[-3])):
            raise ValueError("last three control points must coincide (rest end)")

    @property
    def n_points(self) -> int:
        return len(self.control_points)

    @property
    def n_segments(self) -> int:
        return self.n_points - 3

    @property
    def duration(self) -> float:
        return self.n_segments * self.dt_knot

    def _locate(self, t: float) -> tuple[int, float]:
        """Segment index and local parameter u in [0, 1]; t == duration maps to the last segment."""
        if not (0.0 <= t <= self.duration) or not math.isfinite(t):
            raise OutOfDomain(f"t={t} outside [0, {self.duration}]")
        seg = min(int(t / self.dt_knot), self.n_segments - 1)
        u = t / self.dt_knot - seg
        return seg, u

    def eval(self, t: float) -> np.ndarray:
        """Position at time t."""
        seg, u = self._locate(t)
        basis = np.array([1.0, u, u * u, u * u * u]) @ BASIS_M
        return basis @ self.control_points[seg:seg + 4]

    def eval_derivatives(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(velocity, acceleration, jerk) at time t.

        Evaluated through the derivative splines over the difference control
        points (q_k - q_{k-1}) / dt, so the tripled endpoints yield exact
        zeros at rest. The jerk is piecewise constant per segment.
        """
        seg, u = self._locate(t)
        Q = self.control_points[seg:seg + 4]
        dt = self.dt_knot
        v_ctrl = np.diff(Q, axis=0) / dt
        vel = (np.array([1.0, u, u * u]) @ BASIS_M2) @ v_ctrl
        a_ctrl = np.diff(v_ctrl, axis=0) / dt
        acc = (1.0 - u) * a_ctrl[0] + u * a_ctrl[1]
        jerk = (JERK_WEIGHTS @ Q) / (dt * dt * dt)
        return vel, acc, jerk

    def segment_hull(self, i: int) -> np.ndarray:
        """The four control points whose convex hull contains segment i."""
        if not (0 <= i <= self.n_points - 4):
            raise IndexError(f"segment index {i} outside 0..{self.n_points - 4}")
        return self.control_points[i:i + 4]

    def knot_values(self) -> np.ndarray:
        """Spline value at every knot j*dt, j = 0..N-3 (endpoint included)."""
        pts = self.control_points
        inner = (pts[:-2] + 4.0 * pts[1:-1] + pts[2:]) / 6.0
        return inner

    def velocity_control_points(self) -> np.ndarray:
        """Control points of the degree-2 derivative spline: (q_k - q_{k-1}) / dt."""
        return np.diff(self.control_points, axis=0) / self.dt_knot

    def acceleration_control_points(self) -> np.ndarray:
        """Control points of the degree-1 second-derivative spline."""
        return np.diff(self.control_points, n=2, axis=0) / (self.dt_knot * self.dt_knot)

    def translated(self, offset) -> "SplineTrajectory":
        return SplineTrajectory(self.control_points + np.asarray(offset, dtype=float),
                                self.dt_knot)

    def time_at_distance(self, dist: float, grid: int = 4000) -> float:
        """Earliest time where the spline is `dist` away from its start point.

        Returns the full duration when the whole spline stays closer than
        that (grid scan plus bisection refinement).
        """
        start = self.eval(0.0)
        times = np.linspace(0.0, self.duration, grid)
        hit = None
        for t in times:
            if float(np.linalg.norm(self.eval(t) - start)) >= dist:
                hit = t
                break
        if hit is None:
            return self.duration
        lo = max(0.0, hit - self.duration / (grid - 1))
        hi = hit
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if float(np.linalg.norm(self.eval(mid) - start)) >= dist:
                hi = mid
            else:
                lo = mid
        return hi

    def to_dict(self) -> dict:
        return {
            "control_points": self.control_points.tolist(),
            "dt_knot": self.dt_knot,
            "degree": self.degree,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SplineTrajectory":
        return cls(np.array(data["control_points"], dtype=float),
                   float(data["dt_knot"]), int(data.get("degree", DEGREE)))

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load_json(cls, path) -> "SplineTrajectory":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def sample_rows(self, dt_sample: float) -> list[tuple[float, ...]]:
        """(t, x, y, vx, vy, ax, ay) rows over the whole domain, endpoint included."""
        n = max(2, int(math.floor(self.duration / dt_sample)) + 1)
        rows = []
        for i in range(n):
            t = min(i * dt_sample, self.duration)
            p = self.eval(t)
            v, a, _ = self.eval_derivatives(t)
            rows.append((t, p[0], p[1], v[0], v[1], a[0], a[1]))
        if rows[-1][0] < self.duration:
            t = self.duration
            p = self.eval(t)
            v, a, _ = self.eval_derivatives(t)
            rows.append((t, p[0], p[1], v[0], v[1], a[0], a[1]))
        return rows


def clamped_from_waypoints(waypoints: np.ndarray, dt_knot: float) -> SplineTrajectory:
    """Tripled-endpoint control polygon through the given interior waypoints.

    Control points are [W0, W0, W0, W1, ..., W_{n-2}, Wg, Wg, Wg], giving
    N = n + 4 for n waypoints.
    """
    w = np.asarray(waypoints, dtype=float)
    if len(w) < 4:
        raise ValueError(f"need at least 4 waypoints, got {len(w)}")
    ctrl = np.vstack([w[0], w[0], w[0], w[1:-1], w[-1], w[-1], w[-1]])
    return SplineTrajectory(ctrl, dt_knot)

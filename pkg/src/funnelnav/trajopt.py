"""Spline smoothing of an RRT path under kinodynamic and separation constraints.

Decision variables are the interior control points, the knot spacing dt and
one separating line per (spline segment, obstacle) pair. The solver
alternates three exactly-solvable steps:

  A. separating lines re-fit by the closest-pair construction (max margin),
  B. control points by projected gradient descent on the convex quadratic
     cost under the velocity/acceleration/halfspace constraints,
  C. knot spacing by a golden-section search over the interval where the
     control-point constraints remain feasible.

Each step is non-increasing in the total cost, so the outer loop is monotone
by construction and asserts it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bspline import BASIS_M, SplineTrajectory
from .errors import InfeasibleSeed, TrajOptInfeasible
from .geometry import ConvexPolygon, closest_between_hulls, find_separator, verify_separation
from .rrt import RrtPath

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class TrajOptProblem:
    """One smoothing problem over a fixed RRT prior and inflated obstacles."""

    rrt_path: RrtPath
    obstacles: list[ConvexPolygon]
    v_max: float
    a_max: float
    w1: float = 1.0
    w2: float = 0.1
    w3: float = 0.0
    dt_bounds: tuple[float, float] = (1e-3, 60.0)
    sep_margin: float = 0.01
    max_outer: int = 200
    tol_outer: float = 1e-6
    tol_residual: float = 1e-8
    pgd_max_iters: int = 60
    projection_sweeps: int = 300
    init: str = "rrt"                    # "rrt" or "line" (no-prior cold start)
    acc_constraint_compat: bool = False  # enforce the -q_{k-2} variant instead
    distance_culling: float | None = None

    def __post_init__(self):
        if self.w1 <= 0.0 and self.w2 <= 0.0:
            raise ValueError("at least one of w1, w2 must be positive")
        if self.w1 < 0.0 or self.w2 < 0.0 or self.w3 < 0.0:
            raise ValueError("weights must be nonnegative")
        if self.v_max <= 0.0 or self.a_max <= 0.0:
            raise ValueError("kinodynamic bounds must be positive")
        if not (0.0 < self.dt_bounds[0] <= self.dt_bounds[1]):
            raise ValueError(f"bad dt bounds {self.dt_bounds}")
        if self.init not in ("rrt", "line"):
            raise ValueError(f"unknown init mode {self.init!r}")


@dataclass
class TrajOptSolution:
    trajectory: SplineTrajectory
    hyperplanes: dict
    cost_fit: float
    cost_jerk: float
    cost_time: float
    status: str                      # "converged" | "max_iters" | "infeasible"
    residuals: dict
    cost_trace: list[float] = field(default_factory=list)
    n_outer: int = 0
    solve_time: float = 0.0

    @property
    def cost_total(self) -> float:
        return self.cost_fit + self.cost_jerk + self.cost_time

    def to_dict(self) -> dict:
        # solve_time stays off the artifact: serialized outputs must be
        # byte-reproducible for a fixed seed.
        return {
            "trajectory": self.trajectory.to_dict(),
            "hyperplanes": {
                f"{i},{j}": {"h": h.tolist(), "d": d}
                for (i, j), (h, d) in sorted(self.hyperplanes.items())
            },
            "cost": {"fit": self.cost_fit, "jerk": self.cost_jerk,
                     "time": self.cost_time, "total": self.cost_total},
            "status": self.status,
            "residuals": self.residuals,
            "n_outer": self.n_outer,
        }


class _Workspace:
    """Precomputed matrices and bookkeeping of one solve."""

    def __init__(self, problem: TrajOptProblem):
        X = problem.rrt_path.waypoints
        n_x = len(X)
        if n_x < 4:
            raise ValueError(f"need at least 4 path points, got {n_x}")
        N = n_x + 4
        # The final fixed control point must coincide with the last waypoint.
        assert N - 5 == n_x - 1, "endpoint index bookkeeping broke"
        self.problem = problem
        self.X = X
        self.N = N
        self.free_lo, self.free_hi = 3, N - 4  # inclusive free index range
        self.free = np.zeros(N, dtype=bool)
        self.free[self.free_lo:self.free_hi + 1] = True

        # Fit rows: knot j = 2 .. N-5 tracks waypoint X_{j-1}.
        n_fit = n_x - 2
        A_fit = np.zeros((n_fit, N))
        for r in range(n_fit):
            j = 2 + r
            A_fit[r, j:j + 3] = (1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0)
        self.A_fit = A_fit
        self.T_fit = X[1:n_x - 1].copy()

        # Jerk rows over every segment.
        n_seg = N - 3
        A_jerk = np.zeros((n_seg, N))
        for i in range(n_seg):
            A_jerk[i, i:i + 4] = (-1.0, 3.0, -3.0, 1.0)
        self.A_jerk = A_jerk

        H = 2.0 * (problem.w1 * A_fit.T @ A_fit + problem.w2 * A_jerk.T @ A_jerk)
        H_free = H[np.ix_(self.free, self.free)]
        eigs = np.linalg.eigvalsh(H_free)
        self.lipschitz = max(float(eigs[-1]), 1e-12)

    def quad_cost(self, C: np.ndarray) -> tuple[float, float]:
        fit_res = self.A_fit @ C - self.T_fit
        jerk_res = self.A_jerk @ C
        return (self.problem.w1 * float(np.sum(fit_res ** 2)),
                self.problem.w2 * float(np.sum(jerk_res ** 2)))

    def total_cost(self, C: np.ndarray, dt: float) -> float:
        f, j = self.quad_cost(C)
        return f + j + self.problem.w3 * dt

    def grad(self, C: np.ndarray) -> np.ndarray:
        g = (2.0 * self.problem.w1 * self.A_fit.T @ (self.A_fit @ C - self.T_fit)
             + 2.0 * self.problem.w2 * self.A_jerk.T @ (self.A_jerk @ C))
        g[~self.free] = 0.0
        return g


def _initial_control_points(problem: TrajOptProblem) -> np.ndarray:
    X = problem.rrt_path.waypoints
    if problem.init == "rrt":
        interior = X[1:-1]
    else:
        fracs = np.linspace(0.0, 1.0, len(X))[1:-1, None]
        interior = X[0] + fracs * (X[-1] - X[0])
    return np.vstack([X[0], X[0], X[0], interior, X[-1], X[-1], X[-1]])


def _initial_dt(problem: TrajOptProblem) -> float:
    legs = problem.rrt_path.leg_lengths()
    dt0 = 2.0 * float(legs.max()) / problem.v_max
    lo, hi = problem.dt_bounds
    return min(max(dt0, lo), hi)


def _plane_pairs(C: np.ndarray, problem: TrajOptProblem):
    """(segment, obstacle) index pairs subject to a separating line."""
    n_seg = len(C) - 3
    pairs = []
    for i in range(n_seg):
        for j, poly in enumerate(problem.obstacles):
            if problem.distance_culling is not None:
                dist, _, _ = closest_between_hulls(C[i:i + 4], poly.vertices)
                if dist > problem.distance_culling:
                    continue
            pairs.append((i, j))
    return pairs


def _recovery_plane(hull: np.ndarray, poly: ConvexPolygon, margin: float):
    """Fallback line with the obstacle strictly on its negative side.

    Used only by the no-prior cold start, whose initial hulls may overlap an
    obstacle: the line points from the obstacle centroid toward the hull
    centroid, placed just outside the polygon, so the control-point
    projections push the hull out across iterations.
    """
    g = hull.mean(axis=0) - poly.centroid()
    norm = float(np.linalg.norm(g))
    h = g / norm if norm > 1e-12 else np.array([1.0, 0.0])
    d = float(np.max(poly.vertices @ h)) + margin + 1e-9
    return h, d


def _plane_residual(hull: np.ndarray, poly: ConvexPolygon, h, d, margin: float) -> float:
    """Worst slack of the two strict sides (positive = satisfied with room)."""
    hull_side = float(np.min(hull @ h)) - (d + margin)
    poly_side = (d - margin) - float(np.max(poly.vertices @ h))
    return min(hull_side, poly_side)


def build(problem: TrajOptProblem):
    """Initial guess: control points, knot spacing and separating lines.

    Raises InfeasibleSeed when an initial segment hull intersects an obstacle
    in "rrt" mode; the cold-start mode falls back to recovery lines instead.
    """
    C = _initial_control_points(problem)
    dt = _initial_dt(problem)
    planes = {}
    for (i, j) in _plane_pairs(C, problem):
        poly = problem.obstacles[j]
        sep = find_separator(C[i:i + 4], poly)
        if sep is None:
            if problem.init == "rrt":
                raise InfeasibleSeed(i, j)
            sep = _recovery_plane(C[i:i + 4], poly, problem.sep_margin)
        planes[(i, j)] = sep
    return C, dt, planes


def _feasible_dt_floor(C: np.ndarray, problem: TrajOptProblem) -> float:
    """Smallest dt at which the control-point velocity/acceleration bounds hold."""
    d1 = np.linalg.norm(np.diff(C, axis=0), axis=1)
    dt_vel = float(d1.max()) / problem.v_max
    if problem.acc_constraint_compat:
        second = C[2:] - 2.0 * C[1:-1] - C[:-2]
        dt_acc = float(np.linalg.norm(second, axis=1).max()) / problem.a_max
    else:
        second = C[2:] - 2.0 * C[1:-1] + C[:-2]
        dt_acc = math.sqrt(float(np.linalg.norm(second, axis=1).max()) / problem.a_max)
    return max(dt_vel, dt_acc)


def _golden_section(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    if hi - lo < tol:
        return lo
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    best = min((f(a), a), (fc, c), (fd, d), (f(b), b))
    return best[1]


def _project(C: np.ndarray, dt: float, planes: dict, ws: _Workspace) -> float:
    """Cyclic projections onto every constraint set, in place.

    Returns the worst remaining violation. Pinned control points never move;
    constraints touching only pins are identically satisfied by the tripled
    endpoints.
    """
    problem = ws.problem
    free = ws.free
    v_bound = problem.v_max * dt
    a_bound = problem.a_max * (dt if problem.acc_constraint_compat else dt * dt)
    N = ws.N
    margin = problem.sep_margin
    tol = problem.tol_residual

    worst = math.inf
    for _ in range(problem.projection_sweeps):
        worst = 0.0
        # Velocity pairs: ||q_k - q_{k-1}|| <= v_max dt.
        for k in range(1, N):
            gx = C[k, 0] - C[k - 1, 0]
            gy = C[k, 1] - C[k - 1, 1]
            norm = math.hypot(gx, gy)
            over = norm - v_bound
            if over <= tol:
                continue
            worst = max(worst, over)
            scale = (1.0 - v_bound / norm)
            denom = float(free[k]) + float(free[k - 1])
            if denom == 0.0:
                continue
            cx, cy = scale * gx / denom, scale * gy / denom
            if free[k]:
                C[k, 0] -= cx
                C[k, 1] -= cy
            if free[k - 1]:
                C[k - 1, 0] += cx
                C[k - 1, 1] += cy
        # Acceleration triples.
        sign = -1.0 if problem.acc_constraint_compat else 1.0
        for k in range(2, N):
            gx = C[k, 0] - 2.0 * C[k - 1, 0] + sign * C[k - 2, 0]
            gy = C[k, 1] - 2.0 * C[k - 1, 1] + sign * C[k - 2, 1]
            norm = math.hypot(gx, gy)
            over = norm - a_bound
            if over <= tol:
                continue
            worst = max(worst, over)
            denom = float(free[k]) + 4.0 * float(free[k - 1]) + float(free[k - 2])
            if denom == 0.0:
                continue
            s = (1.0 - a_bound / norm) / denom
            dx, dy = s * gx, s * gy
            if free[k]:
                C[k, 0] -= dx
                C[k, 1] -= dy
            if free[k - 1]:
                C[k - 1, 0] += 2.0 * dx
                C[k - 1, 1] += 2.0 * dy
            if free[k - 2]:
                C[k - 2, 0] -= sign * dx
                C[k - 2, 1] -= sign * dy
        # Separation halfspaces: h.q >= d + margin for the four hull points.
        for (i, _j), (h, d) in planes.items():
            target = d + margin
            for k in range(i, i + 4):
                if not free[k]:
                    continue
                val = C[k, 0] * h[0] + C[k, 1] * h[1]
                short = target - val
                if short > tol:
                    worst = max(worst, short)
                    C[k, 0] += h[0] * short
                    C[k, 1] += h[1] * short
        if worst <= tol:
            break
    return worst


def _step_control_points(C: np.ndarray, dt: float, planes: dict, ws: _Workspace) -> np.ndarray:
    """Projected gradient descent with backtracking; never increases cost."""
    problem = ws.problem
    base_eta = 1.0 / ws.lipschitz
    cost = ws.total_cost(C, dt)
    for _ in range(problem.pgd_max_iters):
        g = ws.grad(C)
        eta = base_eta
        accepted = False
        for _bt in range(30):
            trial = C - eta * g
            _project(trial, dt, planes, ws)
            trial_cost = ws.total_cost(trial, dt)
            if trial_cost < cost - 1e-15:
                C = trial
                improvement = cost - trial_cost
                cost = trial_cost
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        if improvement < problem.tol_outer * max(1.0, abs(cost)) * 0.1:
            break
    return C


def _step_planes(C: np.ndarray, planes: dict, ws: _Workspace) -> dict:
    """Re-fit each separating line, keeping the old one when the refit would
    not improve the current worst slack (keeps the iterate feasible)."""
    problem = ws.problem
    out = {}
    for (i, j), old in planes.items():
        poly = problem.obstacles[j]
        hull = C[i:i + 4]
        cand = find_separator(hull, poly)
        if cand is None:
            out[(i, j)] = old
            continue
        old_res = _plane_residual(hull, poly, old[0], old[1], problem.sep_margin)
        new_res = _plane_residual(hull, poly, cand[0], cand[1], problem.sep_margin)
        out[(i, j)] = cand if new_res >= old_res else old
    return out


def _step_dt(C: np.ndarray, dt: float, ws: _Workspace) -> float:
    problem = ws.problem
    lo, hi = problem.dt_bounds
    floor = max(lo, _feasible_dt_floor(C, problem))
    if floor > hi * (1.0 + 1e-12):
        raise TrajOptInfeasible(
            f"no knot spacing in [{lo}, {hi}] satisfies the kinodynamic bounds "
            f"(needs >= {floor:.6g})"
        )
    if problem.w3 <= 0.0:
        # No time pressure: the cost is spacing-free, and a larger spacing
        # only loosens the velocity/acceleration sets for the next
        # control-point step, so the loosest spacing is optimal.
        return hi
    best = _golden_section(lambda s: problem.w3 * s, floor, hi)
    # dt entered this step feasible, so the search can only improve the cost.
    return best if best <= dt else min(max(dt, floor), hi)


def _dense_kinodynamic_check(traj: SplineTrajectory,
                             samples_per_segment: int = 1000) -> tuple[float, float]:
    """Max sampled speed and acceleration magnitude over the whole spline."""
    us = np.linspace(0.0, 1.0, samples_per_segment)
    vel_basis = np.column_stack([np.zeros_like(us), np.ones_like(us), 2.0 * us, 3.0 * us ** 2])
    acc_basis = np.column_stack([np.zeros_like(us), np.zeros_like(us),
                                 np.full_like(us, 2.0), 6.0 * us])
    vel_w = vel_basis @ BASIS_M
    acc_w = acc_basis @ BASIS_M
    dt = traj.dt_knot
    max_v = 0.0
    max_a = 0.0
    for i in range(traj.n_segments):
        Q = traj.control_points[i:i + 4]
        v = vel_w @ Q / dt
        a = acc_w @ Q / (dt * dt)
        max_v = max(max_v, float(np.linalg.norm(v, axis=1).max()))
        max_a = max(max_a, float(np.linalg.norm(a, axis=1).max()))
    return max_v, max_a


def solve(problem: TrajOptProblem) -> TrajOptSolution:
    """Run the alternating scheme to a monotone fixed point and verify it."""
    t_start = time.perf_counter()
    ws = _Workspace(problem)
    C, dt, planes = build(problem)
    dt = max(dt, _feasible_dt_floor(C, problem))
    lo, hi = problem.dt_bounds
    if dt > hi * (1.0 + 1e-12):
        raise TrajOptInfeasible(f"initial guess needs dt {dt:.6g} > dt_max {hi}")
    _project(C, dt, planes, ws)

    cost_trace = [ws.total_cost(C, dt)]
    status = "max_iters"
    n_outer = 0
    for n_outer in range(1, problem.max_outer + 1):
        planes = _step_planes(C, planes, ws)
        C = _step_control_points(C, dt, planes, ws)
        dt = _step_dt(C, dt, ws)
        cost = ws.total_cost(C, dt)
        if cost > cost_trace[-1] + 1e-9 * max(1.0, abs(cost_trace[-1])):
            raise AssertionError(
                f"outer cost increased: {cost_trace[-1]:.12g} -> {cost:.12g}"
            )
        decrease = cost_trace[-1] - cost
        cost_trace.append(cost)
        if decrease < problem.tol_outer * max(1.0, abs(cost)):
            status = "converged"
            break

    residual = _project(C, dt, planes, ws)
    traj = SplineTrajectory(C, dt)
    max_v, max_a = _dense_kinodynamic_check(traj)
    sep_ok = all(
        verify_separation(C[i:i + 4], problem.obstacles[j], h, d, margin=0.0)
        for (i, j), (h, d) in planes.items()
    )
    slack = 1.0 + 1e-6
    if status == "converged" and not (
        residual <= problem.tol_residual * 10.0
        and max_v <= problem.v_max * slack
        and max_a <= problem.a_max * slack
        and sep_ok
    ):
        status = "max_iters"

    fit, jerk = ws.quad_cost(C)
    return TrajOptSolution(
        trajectory=traj,
        hyperplanes=planes,
        cost_fit=fit,
        cost_jerk=jerk,
        cost_time=problem.w3 * dt,
        status=status,
        residuals={
            "projection": residual,
            "max_speed": max_v,
            "max_accel": max_a,
            "separation_ok": sep_ok,
        },
        cost_trace=cost_trace,
        n_outer=n_outer,
        solve_time=time.perf_counter() - t_start,
    )


@dataclass
class ValidationReport:
    endpoint_error: float
    endpoint_rest_error: float
    ctrl_velocity_excess: float      # max ||q_k - q_{k-1}|| - v_max*dt, <= 0 when satisfied
    ctrl_acceleration_excess: float
    dense_speed_excess: float
    dense_accel_excess: float
    separation_min_slack: float      # min over pairs/points of strict-side slack
    separation_all_verified: bool

    @property
    def ok(self) -> bool:
        tol = 1e-6
        return (self.endpoint_error < 1e-9
                and self.endpoint_rest_error < 1e-9
                and self.ctrl_velocity_excess <= tol
                and self.ctrl_acceleration_excess <= tol
                and self.dense_speed_excess <= tol
                and self.dense_accel_excess <= tol
                and self.separation_all_verified)

    def to_dict(self) -> dict:
        return {
            "endpoint_error": self.endpoint_error,
            "endpoint_rest_error": self.endpoint_rest_error,
            "ctrl_velocity_excess": self.ctrl_velocity_excess,
            "ctrl_acceleration_excess": self.ctrl_acceleration_excess,
            "dense_speed_excess": self.dense_speed_excess,
            "dense_accel_excess": self.dense_accel_excess,
            "separation_min_slack": self.separation_min_slack,
            "separation_all_verified": self.separation_all_verified,
            "ok": self.ok,
        }


def validate(solution: TrajOptSolution, problem: TrajOptProblem) -> ValidationReport:
    """Recompute every constraint residual from scratch, solver-independent."""
    traj = solution.trajectory
    C = traj.control_points
    dt = traj.dt_knot
    X = problem.rrt_path.waypoints

    p0 = traj.eval(0.0)
    pT = traj.eval(traj.duration)
    endpoint_error = max(float(np.linalg.norm(p0 - X[0])), float(np.linalg.norm(pT - X[-1])))
    v0, a0, _ = traj.eval_derivatives(0.0)
    vT, aT, _ = traj.eval_derivatives(traj.duration)
    rest = max(float(np.linalg.norm(v0)), float(np.linalg.norm(a0)),
               float(np.linalg.norm(vT)), float(np.linalg.norm(aT)))

    d1 = np.linalg.norm(np.diff(C, axis=0), axis=1)
    vel_excess = float(d1.max()) - problem.v_max * dt
    if problem.acc_constraint_compat:
        second = C[2:] - 2.0 * C[1:-1] - C[:-2]
        acc_excess = float(np.linalg.norm(second, axis=1).max()) - problem.a_max * dt
    else:
        second = C[2:] - 2.0 * C[1:-1] + C[:-2]
        acc_excess = float(np.linalg.norm(second, axis=1).max()) - problem.a_max * dt * dt

    max_v, max_a = _dense_kinodynamic_check(traj)

    min_slack = math.inf
    all_ok = True
    for (i, j), (h, d) in solution.hyperplanes.items():
        poly = problem.obstacles[j]
        hull = C[i:i + 4]
        min_slack = min(min_slack, _plane_residual(hull, poly, h, d, margin=0.0))
        if not verify_separation(hull, poly, h, d, margin=0.0):
            all_ok = False

    return ValidationReport(
        endpoint_error=endpoint_error,
        endpoint_rest_error=rest,
        ctrl_velocity_excess=vel_excess,
        ctrl_acceleration_excess=acc_excess,
        dense_speed_excess=max_v - problem.v_max,
        dense_accel_excess=max_a - problem.a_max,
        separation_min_slack=min_slack if solution.hyperplanes else math.inf,
        separation_all_verified=all_ok,
    )

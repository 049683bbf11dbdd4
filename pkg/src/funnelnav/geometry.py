"""Convex polygon obstacles, Minkowski inflation, and linear separation.

Everything works on planar convex sets: obstacles are strictly convex CCW
polygons, spline-segment hulls are arbitrary (possibly degenerate) sets of
four control points. Separating lines are found exactly from the closest
pair between the two convex hulls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex polygon with counterclockwise vertex order."""

    vertices: np.ndarray  # (n, 2)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", verts)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise ValueError(f"need an (n>=3, 2) vertex array, got shape {verts.shape}")
        n = len(verts)
        for i in range(n):
            a, b, c = verts[i], verts[(i + 1) % n], verts[(i + 2) % n]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cross <= 0.0:
                raise ValueError(
                    f"vertices not strictly convex CCW at index {i} (cross={cross:.3e})"
                )

    def __len__(self) -> int:
        return len(self.vertices)

    def contains(self, p, include_boundary: bool = True, tol: float = 0.0) -> bool:
        """Point membership; the boundary counts as inside by default.

        `tol` loosens the half-plane tests for queries on numerically noisy
        polygons (e.g. Minkowski sums); the default is exact.
        """
        x, y = float(p[0]), float(p[1])
        verts = self.vertices
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
            if include_boundary:
                if cross < -tol:
                    return False
            elif cross <= tol:
                return False
        return True

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def area(self) -> float:
        """Shoelace area (positive for CCW)."""
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns CCW hull vertices, collinear points dropped.

    Degenerate inputs (all points equal or collinear) return the 1- or
    2-point "hull" rather than raising.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        return np.unique(hull, axis=0)
    return _prune_collinear(hull)


def _prune_collinear(hull: np.ndarray) -> np.ndarray:
    """Drop hull vertices whose turn is collinear up to float noise.

    Minkowski sums produce vertex clusters along one edge that differ only
    in the last few ulps; keeping them would make downstream strict-convexity
    checks fragile.
    """
    scale = float(np.max(np.abs(hull))) or 1.0
    eps = 1e-9 * scale * scale
    keep = []
    n = len(hull)
    for i in range(n):
        a, b, c = hull[(i - 1) % n], hull[i], hull[(i + 1) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross > eps:
            keep.append(i)
    if len(keep) < 3:
        return hull
    return hull[keep]


def inflate(poly: ConvexPolygon, rho_bar: float, k_gon: int = 16) -> ConvexPolygon:
    """Minkowski sum of poly with a regular k-gon circumscribing the rho_bar disk.

    The circumscribed polygon contains the disk, so the result conservatively
    over-approximates the true disk inflation.
    """
    if rho_bar <= 0.0:
        raise ValueError(f"clearance must be positive, got {rho_bar}")
    if k_gon < 8 and k_gon != 4:
        raise ValueError(f"k_gon must be >= 8 (or 4 for the square case), got {k_gon}")
    radius = rho_bar / math.cos(math.pi / k_gon)
    angles = np.arange(k_gon) * (2.0 * math.pi / k_gon) + math.pi / k_gon
    disk = np.column_stack((radius * np.cos(angles), radius * np.sin(angles)))
    sums = (poly.vertices[:, None, :] + disk[None, :, :]).reshape(-1, 2)
    return ConvexPolygon(convex_hull(sums))


@dataclass
class Workspace:
    """Rectangular operating area with convex obstacles and a clearance margin."""

    bounds: tuple[float, float, float, float]  # (x_min, y_min, x_max, y_max)
    obstacles: list[ConvexPolygon] = field(default_factory=list)
    clearance: float = 1.0
    inflation_k_gon: int = 16
    _inflated: list[ConvexPolygon] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        x0, y0, x1, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate bounds {self.bounds}")
        if self.clearance <= 0.0:
            raise ValueError("clearance must be positive")
        for k, poly in enumerate(self.obstacles):
            for vtx in poly.vertices:
                if not (x0 <= vtx[0] <= x1 and y0 <= vtx[1] <= y1):
                    raise ValueError(f"obstacle {k} vertex {vtx} outside bounds {self.bounds}")

    def inflated_obstacles(self) -> list[ConvexPolygon]:
        if self._inflated is None:
            self._inflated = [inflate(o, self.clearance, self.inflation_k_gon) for o in self.obstacles]
        return self._inflated

    def in_bounds(self, p) -> bool:
        x0, y0, x1, y1 = self.bounds
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.bounds
        return math.hypot(x1 - x0, y1 - y0)


def point_free(p, ws: Workspace, inflated: bool = True) -> bool:
    """True iff p lies in bounds and strictly outside every obstacle.

    A point on an obstacle boundary counts as colliding.
    """
    if not ws.in_bounds(p):
        return False
    obstacles = ws.inflated_obstacles() if inflated else ws.obstacles
    return not any(o.contains(p, include_boundary=True) for o in obstacles)


def _segments_touch(p1, p2, q1, q2) -> bool:
    """Exact segment intersection including touching and collinear overlap."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    if d1 == 0 and on_segment(q1, q2, p1):
        return True
    if d2 == 0 and on_segment(q1, q2, p2):
        return True
    if d3 == 0 and on_segment(p1, p2, q1):
        return True
    return bool(d4 == 0 and on_segment(p1, p2, q2))


def segment_intersects_polygon(a, b, poly: ConvexPolygon) -> bool:
    """Exact intersection of segment a-b with a convex polygon (boundary counts)."""
    if poly.contains(a) or poly.contains(b):
        return True
    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        if _segments_touch(a, b, verts[i], verts[(i + 1) % n]):
            return True
    return False


def segment_free(a, b, ws: Workspace, inflated: bool = True) -> bool:
    """Exact collision check of segment a-b against the (inflated) obstacles.

    Exactness (orientation predicates, no sub-sampling) is what makes
    arbitrarily fine sampled rechecks of returned paths pass by construction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (ws.in_bounds(a) and ws.in_bounds(b)):
        return False
    obstacles = ws.inflated_obstacles() if inflated else ws.obstacles
    return not any(segment_intersects_polygon(a, b, poly) for poly in obstacles)


def _seg_seg_closest(p1, p2, q1, q2):
    """Closest points between segments [p1,p2] and [q1,q2] (degenerate-safe).

    Returns (distance, point_on_p, point_on_q).
    """
    d1 = p2 - p1
    d2 = q2 - q1
    r = p1 - q1
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= 1e-30 and e <= 1e-30:
        return float(np.linalg.norm(p1 - q1)), p1, q1
    if a <= 1e-30:
        t = min(max(f / e, 0.0), 1.0)
        cq = q1 + t * d2
        return float(np.linalg.norm(p1 - cq)), p1, cq
    c = float(d1 @ r)
    if e <= 1e-30:
        s = min(max(-c / a, 0.0), 1.0)
        cp = p1 + s * d1
        return float(np.linalg.norm(cp - q1)), cp, q1
    b = float(d1 @ d2)
    denom = a * e - b * b
    s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 1e-30 else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(max(-c / a, 0.0), 1.0)
    elif t > 1.0:
        t = 1.0
        s = min(max((b - c) / a, 0.0), 1.0)
    cp = p1 + s * d1
    cq = q1 + t * d2
    return float(np.linalg.norm(cp - cq)), cp, cq


def _hull_edges(hull: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Edge list of a hull that may degenerate to a point or a segment."""
    n = len(hull)
    if n == 1:
        return [(hull[0], hull[0])]
    if n == 2:
        return [(hull[0], hull[1])]
    return [(hull[i], hull[(i + 1) % n]) for i in range(n)]


def _point_in_hull(p, hull: np.ndarray) -> bool:
    n = len(hull)
    if n < 3:
        return False
    for i in range(n):
        a, b = hull[i], hull[(i + 1) % n]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < 0.0:
            return False
    return True


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Exact orientation-sign test for proper segment crossing."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def closest_between_hulls(points_a: np.ndarray, points_b: np.ndarray):
    """Closest pair between the convex hulls of two point sets.

    Returns (distance, point_on_a, point_on_b); distance 0.0 means the hulls
    intersect (including containment and tangency). Edge crossings are
    detected by exact orientation predicates because the parametric distance
    of crossing segments only reaches zero up to roundoff.
    """
    ha = convex_hull(points_a)
    hb = convex_hull(points_b)
    if _point_in_hull(ha[0], hb) or _point_in_hull(hb[0], ha):
        return 0.0, ha[0], ha[0]
    scale = max(1.0, float(np.max(np.abs(ha))), float(np.max(np.abs(hb))))
    best = (math.inf, None, None)
    for ea in _hull_edges(ha):
        for eb in _hull_edges(hb):
            if _segments_cross(ea[0], ea[1], eb[0], eb[1]):
                return 0.0, ea[0], ea[0]
            d, cp, cq = _seg_seg_closest(ea[0], ea[1], eb[0], eb[1])
            if d < best[0]:
                best = (d, cp, cq)
    if best[0] <= 1e-12 * scale:
        return 0.0, best[1], best[2]
    return best


def find_separator(hull_points: np.ndarray, poly: ConvexPolygon):
    """Maximum-margin separating line between a segment hull and an obstacle.

    Returns (h, d) with unit h such that h.q > d on the hull side and
    h.p < d on the polygon side, or None when the convex hulls intersect
    (tangency included; strict separation is impossible there).
    """
    hull_points = np.asarray(hull_points, dtype=float)
    dist, cp, cq = closest_between_hulls(hull_points, poly.vertices)
    if dist <= 0.0:
        return None
    h = (cp - cq) / dist
    d = float(h @ (cp + cq)) / 2.0
    return h, d


def verify_separation(hull_points: np.ndarray, poly: ConvexPolygon,
                      h: np.ndarray, d: float, margin: float = 0.0) -> bool:
    """Check h.q > d + margin for all hull points and h.p < d - margin for the polygon."""
    h = np.asarray(h, dtype=float)
    if float(h @ h) <= 0.0:
        raise ValueError("separator normal must be non-zero")
    hull_points = np.asarray(hull_points, dtype=float)
    if not np.all(hull_points @ h > d + margin):
        return False
    return bool(np.all(poly.vertices @ h < d - margin))


def min_distance_to_obstacles(p, obstacles: list[ConvexPolygon]) -> float:
    """Signed-ish clearance: 0 when inside some obstacle, else min boundary distance."""
    if not obstacles:
        return math.inf
    p = np.asarray(p, dtype=float)
    best = math.inf
    for poly in obstacles:
        if poly.contains(p):
            return 0.0
        for a, b in poly.edges():
            d, _, _ = _seg_seg_closest(p, p, a, b)
            best = min(best, d)
    return best


def distances_to_obstacles(points: np.ndarray, obstacles: list[ConvexPolygon]) -> np.ndarray:
    """Vectorized min_distance_to_obstacles over an (n, 2) point array."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not obstacles:
        return np.full(n, math.inf)
    best = np.full(n, math.inf)
    for poly in obstacles:
        verts = poly.vertices
        inside = np.ones(n, dtype=bool)
        dist_poly = np.full(n, math.inf)
        for i in range(len(verts)):
            a = verts[i]
            b = verts[(i + 1) % len(verts)]
            ab = b - a
            ap = points - a
            cross = ab[0] * ap[:, 1] - ab[1] * ap[:, 0]
            inside &= cross >= 0.0
            denom = float(ab @ ab)
            s = np.clip((ap @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(n)
            closest = a + s[:, None] * ab
            dist_poly = np.minimum(dist_poly, np.linalg.norm(points - closest, axis=1))
        dist_poly[inside] = 0.0
        best = np.minimum(best, dist_poly)
    return best

"""Planar primitives: points, convex polygons, hulls, enclosing rectangles.

All lengths are millimeters and all angles are degrees unless a name says
otherwise. Comparisons use the absolute tolerance ``EPS``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

EPS = 1e-6


class GeometryError(ValueError):
    """Raised for inputs outside an operation's domain."""


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle with ``length >= width`` and long-axis ``angle`` in [0, 180)."""

    center: Point2
    length: float
    width: float
    angle: float = 0.0

    def __post_init__(self):
        if self.width > self.length:
            length, width = self.width, self.length
            object.__setattr__(self, "length", length)
            object.__setattr__(self, "width", width)
            object.__setattr__(self, "angle", self.angle + 90.0)
        object.__setattr__(self, "angle", normalize_angle(self.angle))
        object.__setattr__(self, "center", Point2(float(self.center[0]), float(self.center[1])))

    @property
    def area(self) -> float:
        return self.length * self.width

    def corners(self) -> np.ndarray:
        """Corner points in counter-clockwise order, shape (4, 2)."""
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
        return transform_points(local, self.angle, self.center)

    def polygon(self) -> "ConvexPolygon":
        return ConvexPolygon(self.corners())


class ConvexPolygon:
    """Counter-clockwise vertex list of a convex polygon.

    Hulls of one or two distinct points are kept as degenerate polygons.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        arr = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(arr)):
            raise GeometryError("polygon vertices must be finite")
        self.vertices = arr

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return (Point2(float(x), float(y)) for x, y in self.vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConvexPolygon):
            return NotImplemented
        return self.vertices.shape == other.vertices.shape and bool(
            np.allclose(self.vertices, other.vertices, atol=EPS, rtol=0.0)
        )

    def __repr__(self) -> str:
        pts = ", ".join(f"({x:g}, {y:g})" for x, y in self.vertices)
        return f"ConvexPolygon([{pts}])"

    @property
    def area(self) -> float:
        if len(self.vertices) < 3:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def centroid(self) -> Point2:
        c = self.vertices.mean(axis=0)
        return Point2(float(c[0]), float(c[1]))

    def contains(self, point, tol: float = EPS) -> bool:
        """Inclusive point-in-polygon test (boundary counts as inside)."""
        v = self.vertices
        if len(v) < 3:
            return False
        e = np.roll(v, -1, axis=0) - v
        w = np.asarray(point, dtype=float) - v
        cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
        lengths = np.hypot(e[:, 0], e[:, 1])
        return bool(np.all(cross >= -tol * lengths))

    def transformed(self, angle_deg: float, offset=(0.0, 0.0)) -> "ConvexPolygon":
        return ConvexPolygon(transform_points(self.vertices, angle_deg, offset))


def normalize_angle(angle: float, period: float = 180.0) -> float:
    a = math.fmod(angle, period)
    if a < 0:
        a += period
    if period - a < 1e-9:
        a = 0.0
    return a


def rotation_matrix(angle_deg: float) -> np.ndarray:
    t = math.radians(angle_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def transform_points(points, angle_deg: float, offset=(0.0, 0.0)) -> np.ndarray:
    """Rotate ``points`` (n, 2) about the origin by ``angle_deg`` then translate."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return pts @ rotation_matrix(angle_deg).T + np.asarray(offset, dtype=float)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable) -> ConvexPolygon:
    """Convex hull by monotone chain.

    Returns the strictly convex vertex set in counter-clockwise order starting
    from the lowest-x (then lowest-y) point. Interior, duplicate and collinear
    boundary points are dropped.
    """
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
    if pts.size == 0:
        raise GeometryError("convex hull of an empty point set")
    pts = pts.reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise GeometryError("points must be finite")
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) <= 2:
        if len(uniq) == 2 and math.dist(uniq[0], uniq[1]) <= EPS:
            uniq = uniq[:1]
        return ConvexPolygon(uniq)

    def chain(seq):
        out: list = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                # drop a when o -> a -> p turns clockwise or is collinear
                scale = math.dist(o, p) or 1.0
                if _cross(o, a, p) <= EPS * scale:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:
        hull = [uniq[0], uniq[-1]]
    # merge near-duplicate vertices
    cleaned = [hull[0]]
    for p in hull[1:]:
        if math.dist(p, cleaned[-1]) > EPS:
            cleaned.append(p)
    if len(cleaned) > 1 and math.dist(cleaned[0], cleaned[-1]) <= EPS:
        cleaned.pop()
    return ConvexPolygon(cleaned)


def min_area_rect(poly: ConvexPolygon | Sequence) -> OrientedRect:
    """Minimum-area rectangle enclosing a convex polygon.

    The optimal rectangle has a side collinear with some hull edge, so every
    edge orientation is evaluated at once and the first minimum wins.
    """
    if not isinstance(poly, ConvexPolygon):
        poly = convex_hull(poly)
    v = poly.vertices
    if len(v) == 0:
        raise GeometryError("empty polygon")
    if len(v) == 1:
        return OrientedRect(Point2(v[0, 0], v[0, 1]), 0.0, 0.0, 0.0)

    edges = np.roll(v, -1, axis=0) - v
    if len(v) == 2:
        edges = edges[:1]
    theta = np.arctan2(edges[:, 1], edges[:, 0])
    c, s = np.cos(theta), np.sin(theta)
    # projections of every vertex on each edge direction and its normal
    u = v[:, 0][None, :] * c[:, None] + v[:, 1][None, :] * s[:, None]
    w = -v[:, 0][None, :] * s[:, None] + v[:, 1][None, :] * c[:, None]
    umin, umax = u.min(axis=1), u.max(axis=1)
    wmin, wmax = w.min(axis=1), w.max(axis=1)
    area = (umax - umin) * (wmax - wmin)
    best = area.min()
    # prefer the earliest edge among numerically equal areas
    i = int(np.flatnonzero(area <= best + 1e-9 * max(best, 1.0))[0])
    du, dw = umax[i] - umin[i], wmax[i] - wmin[i]
    cu, cw = (umax[i] + umin[i]) / 2.0, (wmax[i] + wmin[i]) / 2.0
    center = Point2(cu * c[i] - cw * s[i], cu * s[i] + cw * c[i])
    angle = math.degrees(theta[i])
    if dw > du + EPS:
        return OrientedRect(center, dw, du, angle + 90.0)
    return OrientedRect(center, du, dw, angle)


def carver_lhs(p: float, q: float, a: float, b: float) -> float:
    """Left-hand side of the tilted-fit inequality for p x q inside a x b."""
    return ((a + b) / (p + q)) ** 2 + ((a - b) / (p - q)) ** 2


def dims_fit(p: float, q: float, a: float, b: float, tol: float = EPS) -> bool:
    """Whether a p x q rectangle fits inside an a x b rectangle at some rotation."""
    p, q = max(p, q), min(p, q)
    a, b = max(a, b), min(a, b)
    if q > b + tol:
        return False
    if p <= a + tol:
        return True
    # here p > a >= b >= q, so p > q and the second term is finite
    return carver_lhs(p, q, a, b) >= 2.0 - tol


def rect_fits_in_rect(inner: OrientedRect, outer: OrientedRect) -> bool:
    """Orientation-free rectangle containment test on side lengths."""
    return dims_fit(inner.length, inner.width, outer.length, outer.width)


def _axes(v: np.ndarray) -> np.ndarray:
    if len(v) < 2:
        return np.empty((0, 2))
    e = np.roll(v, -1, axis=0) - v
    if len(v) == 2:
        e = e[:1]
    n = np.stack([-e[:, 1], e[:, 0]], axis=1)
    norm = np.hypot(n[:, 0], n[:, 1])
    keep = norm > 1e-12
    return n[keep] / norm[keep, None]


def polygons_intersect(a: ConvexPolygon, b: ConvexPolygon, tol: float = EPS) -> bool:
    """Separating-axis overlap test. Touching within ``tol`` counts as overlap."""
    va, vb = a.vertices, b.vertices
    axes = [_axes(va), _axes(vb)]
    if len(va) < 3 or len(vb) < 3:
        # edge normals alone cannot separate points and segments
        d = vb.mean(axis=0) - va.mean(axis=0)
        dn = math.hypot(d[0], d[1])
        if dn > 1e-12:
            axes.append((d / dn)[None, :])
        for v in (va, vb):
            if len(v) == 2:
                e = v[1] - v[0]
                axes.append((e / math.hypot(e[0], e[1]))[None, :])
        if len(va) == 1 and len(vb) == 1:
            return dn <= tol
    ax = np.concatenate(axes, axis=0)
    pa = va @ ax.T
    pb = vb @ ax.T
    gap = np.maximum(pb.min(axis=0) - pa.max(axis=0), pa.min(axis=0) - pb.max(axis=0))
    return not bool(np.any(gap > tol))


def penetration_vector(a: ConvexPolygon, b: ConvexPolygon) -> np.ndarray | None:
    """Minimum translation that moves ``b`` out of ``a``, or None if disjoint."""
    va, vb = a.vertices, b.vertices
    ax = np.concatenate([_axes(va), _axes(vb)], axis=0)
    pa = va @ ax.T
    pb = vb @ ax.T
    overlap = np.minimum(pa.max(axis=0) - pb.min(axis=0), pb.max(axis=0) - pa.min(axis=0))
    if np.any(overlap <= 0):
        return None
    i = int(np.argmin(overlap))
    axis = ax[i]
    if np.dot(vb.mean(axis=0) - va.mean(axis=0), axis) < 0:
        axis = -axis
    return axis * overlap[i]

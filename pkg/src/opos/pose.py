"""Picking pose sampling and open-gripper collision checking.

The gripper frame has its x-axis along the fingers and its y-axis along the
closing direction; a pose (x, y, gamma) puts the gripping-area center at
(x, y) with the gripper x-axis rotated ``gamma`` degrees from world x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .cluster import Cluster, EffectiveGrippingArea
from .geometry import EPS, ConvexPolygon, OrientedRect, Point2, polygons_intersect, rotation_matrix
from .scene import GripperSpec, SceneLayout

GAMMAS = tuple(15.0 * i for i in range(12))
FINE_STEP = 2.0
COARSE_LIMIT = 20.0
COARSE_STEPS = 10


@dataclass(frozen=True)
class PickPose:
    x: float
    y: float
    gamma: float

    def as_dict(self) -> dict:
        return {"x_mm": self.x, "y_mm": self.y, "gamma_deg": self.gamma}


class PoseBatch:
    """Poses stored column-wise; ``lx``/``ly`` are centers in the gripper frame."""

    __slots__ = ("x", "y", "gamma", "lx", "ly")

    def __init__(self, x, y, gamma):
        self.x = np.asarray(x, dtype=float).reshape(-1)
        self.y = np.asarray(y, dtype=float).reshape(-1)
        self.gamma = np.asarray(gamma, dtype=float).reshape(-1)
        self.lx = np.empty_like(self.x)
        self.ly = np.empty_like(self.y)
        for g, idx in self.groups():
            self.lx[idx], self.ly[idx] = _to_local(self.x[idx], self.y[idx], g)

    @classmethod
    def from_poses(cls, poses: Sequence[PickPose]) -> "PoseBatch":
        return cls([p.x for p in poses], [p.y for p in poses], [p.gamma for p in poses])

    def __len__(self) -> int:
        return len(self.x)

    def __getitem__(self, i: int) -> PickPose:
        return PickPose(float(self.x[i]), float(self.y[i]), float(self.gamma[i]))

    def __iter__(self) -> Iterator[PickPose]:
        return (self[i] for i in range(len(self)))

    def take(self, idx) -> "PoseBatch":
        return PoseBatch(self.x[idx], self.y[idx], self.gamma[idx])

    def groups(self) -> Iterator[tuple[float, np.ndarray]]:
        """(gamma, indices) for each run of equal rotation, in order."""
        n = len(self)
        if n == 0:
            return
        cuts = np.flatnonzero(np.diff(self.gamma) != 0) + 1
        for lo, hi in zip(np.r_[0, cuts], np.r_[cuts, n]):
            yield float(self.gamma[lo]), np.arange(lo, hi)


def _to_local(x, y, gamma: float):
    """World coordinates to the gripper frame of a single rotation ``gamma``."""
    t = math.radians(gamma)
    c, s = math.cos(t), math.sin(t)
    return c * x + s * y, -s * x + c * y


def axis_samples(lo: float, hi: float) -> np.ndarray:
    """Sample positions for one axis of the valid-center interval [lo, hi].

    Wide intervals get ten equal steps each way from the center; narrow ones
    use fixed 2 mm steps anchored at the center.
    """
    width = max(hi - lo, 0.0)
    mid = (lo + hi) / 2.0
    if width > COARSE_LIMIT:
        return np.linspace(lo, hi, 2 * COARSE_STEPS + 1)
    n = int(math.floor(width / 2.0 / FINE_STEP + 1e-9))
    return mid + FINE_STEP * np.arange(-n, n + 1)


def sample_pose_batch(hull: ConvexPolygon, ega: EffectiveGrippingArea) -> PoseBatch:
    """Grid of gripping-area centers that cover ``hull`` at each of 12 rotations."""
    a, b = ega.length_a, ega.width_b
    v = hull.vertices
    xs, ys, gs = [], [], []
    for g in GAMMAS:
        lx, ly = _to_local(v[:, 0], v[:, 1], g)
        x0, x1 = lx.min(), lx.max()
        y0, y1 = ly.min(), ly.max()
        if x1 - x0 > a + EPS or y1 - y0 > b + EPS:
            continue
        cx = axis_samples(x1 - a / 2.0, x0 + a / 2.0)
        cy = axis_samples(y1 - b / 2.0, y0 + b / 2.0)
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        gx, gy = gx.ravel(), gy.ravel()
        r = rotation_matrix(g)
        xs.append(r[0, 0] * gx + r[0, 1] * gy)
        ys.append(r[1, 0] * gx + r[1, 1] * gy)
        gs.append(np.full(gx.shape, g))
    if not xs:
        return PoseBatch([], [], [])
    return PoseBatch(np.concatenate(xs), np.concatenate(ys), np.concatenate(gs))


def sample_poses(cluster: Cluster, ega: EffectiveGrippingArea) -> list[PickPose]:
    return list(sample_pose_batch(cluster.hull, ega))


def finger_rects(pose: PickPose, gripper: GripperSpec) -> tuple[OrientedRect, OrientedRect]:
    off = gripper.spread / 2.0 + gripper.finger_thickness / 2.0
    r = rotation_matrix(pose.gamma)
    out = []
    for sign in (1.0, -1.0):
        dx, dy = r @ np.array([0.0, sign * off])
        center = Point2(pose.x + dx, pose.y + dy)
        out.append(OrientedRect(center, gripper.finger_length, gripper.finger_thickness, pose.gamma))
    return out[0], out[1]


def ega_rect(pose: PickPose, ega: EffectiveGrippingArea) -> OrientedRect:
    return OrientedRect(Point2(pose.x, pose.y), ega.length_a, ega.width_b, pose.gamma)


def _outside_bin(corners: np.ndarray, scene: SceneLayout) -> bool:
    return bool(
        corners[:, 0].min() < -EPS
        or corners[:, 1].min() < -EPS
        or corners[:, 0].max() > scene.bin_width + EPS
        or corners[:, 1].max() > scene.bin_height + EPS
    )


def check_collision(
    pose: PickPose, scene: SceneLayout, cluster: Cluster | None, gripper: GripperSpec
) -> bool:
    """True if an open finger touches any object (member or not) or leaves the bin.

    Fingers resting against a wall are allowed; touching an object is not.
    """
    for rect in finger_rects(pose, gripper):
        corners = rect.corners()
        if _outside_bin(corners, scene):
            return True
        poly = ConvexPolygon(corners)
        reach = math.hypot(rect.length, rect.width) / 2.0
        d = np.hypot(scene.centers[:, 0] - rect.center.x, scene.centers[:, 1] - rect.center.y)
        for j in np.flatnonzero(d <= reach + scene.radii + EPS):
            if polygons_intersect(poly, scene.footprints[j]):
                return True
    return False


class RotatedScene:
    """Object footprints expressed in a gripper frame rotated by ``gamma``."""

    __slots__ = ("verts", "axes", "pmin", "pmax", "lo", "hi", "centers")

    def __init__(self, scene: SceneLayout, gamma: float):
        fps = scene.footprints
        n = len(fps)
        vmax = max((len(p) for p in fps), default=1)
        verts = np.zeros((n, vmax, 2))
        for i, p in enumerate(fps):
            v = p.vertices
            verts[i, : len(v)] = v
            verts[i, len(v) :] = v[-1]
        t = math.radians(gamma)
        c, s = math.cos(t), math.sin(t)
        lv = np.empty_like(verts)
        lv[..., 0] = c * verts[..., 0] + s * verts[..., 1]
        lv[..., 1] = -s * verts[..., 0] + c * verts[..., 1]
        e = np.roll(lv, -1, axis=1) - lv
        nrm = np.stack([-e[..., 1], e[..., 0]], axis=-1)
        ln = np.hypot(nrm[..., 0], nrm[..., 1])
        # padded vertices give zero-length edges: reuse the first real axis
        bad = ln < 1e-12
        ln = np.where(bad, 1.0, ln)
        nrm = nrm / ln[..., None]
        if bad.any():
            first = np.broadcast_to(nrm[:, :1, :], nrm.shape)
            nrm = np.where(bad[..., None], first, nrm)
        proj = np.einsum("nvd,nkd->nkv", lv, nrm)
        self.verts = lv
        self.axes = nrm
        self.pmin = proj.min(axis=2)
        self.pmax = proj.max(axis=2)
        self.lo = lv.min(axis=1)
        self.hi = lv.max(axis=1)
        cx, cy = _to_local(scene.centers[:, 0], scene.centers[:, 1], gamma)
        self.centers = np.stack([cx, cy], axis=1) if n else np.empty((0, 2))


def rotated_scene(scene: SceneLayout, gamma: float) -> RotatedScene:
    key = ("rotated", round(gamma, 9))
    rs = scene._cache.get(key)
    if rs is None:
        rs = scene._cache[key] = RotatedScene(scene, gamma)
    return rs


def boxes_hit(rs: RotatedScene, x0, x1, y0, y1, tol: float = EPS) -> np.ndarray:
    """(P, n) overlap table between axis-aligned boxes and rotated footprints."""
    x0, x1, y0, y1 = (np.asarray(v, dtype=float)[:, None] for v in (x0, x1, y0, y1))
    hit = (
        (x0 <= rs.hi[None, :, 0] + tol)
        & (rs.lo[None, :, 0] <= x1 + tol)
        & (y0 <= rs.hi[None, :, 1] + tol)
        & (rs.lo[None, :, 1] <= y1 + tol)
    )
    pi, oi = np.nonzero(hit)
    if len(pi) == 0:
        return hit
    cx = ((x0 + x1) / 2.0)[pi, 0]
    cy = ((y0 + y1) / 2.0)[pi, 0]
    hx = ((x1 - x0) / 2.0)[pi, 0]
    hy = ((y1 - y0) / 2.0)[pi, 0]
    ax = rs.axes[oi]
    c = cx[:, None] * ax[..., 0] + cy[:, None] * ax[..., 1]
    r = hx[:, None] * np.abs(ax[..., 0]) + hy[:, None] * np.abs(ax[..., 1])
    sep = (c - r > rs.pmax[oi] + tol) | (rs.pmin[oi] > c + r + tol)
    hit[pi, oi] = ~sep.any(axis=1)
    return hit


def collision_mask(batch: PoseBatch, scene: SceneLayout, gripper: GripperSpec) -> np.ndarray:
    """Vectorized ``check_collision`` over a pose batch."""
    out = np.zeros(len(batch), dtype=bool)
    hl = gripper.finger_length / 2.0
    s = gripper.spread / 2.0
    t = gripper.finger_thickness
    corner_x = np.array([-hl, hl, hl, -hl])
    for gamma, idx in batch.groups():
        lx, ly = batch.lx[idx], batch.ly[idx]
        rs = rotated_scene(scene, gamma)
        r = rotation_matrix(gamma)
        hit = np.zeros(len(idx), dtype=bool)
        for y_lo, y_hi in ((s, s + t), (-s - t, -s)):
            # finger corners back in the world frame for the wall test
            cxl = lx[:, None] + corner_x[None, :]
            cyl = ly[:, None] + np.array([y_lo, y_lo, y_hi, y_hi])[None, :]
            wx = r[0, 0] * cxl + r[0, 1] * cyl
            wy = r[1, 0] * cxl + r[1, 1] * cyl
            hit |= (
                (wx.min(axis=1) < -EPS)
                | (wy.min(axis=1) < -EPS)
                | (wx.max(axis=1) > scene.bin_width + EPS)
                | (wy.max(axis=1) > scene.bin_height + EPS)
            )
            if len(scene):
                hit |= boxes_hit(rs, lx - hl, lx + hl, ly + y_lo, ly + y_hi).any(axis=1)
        out[idx] = hit
    return out


def collision_free_poses(
    poses: Sequence[PickPose] | PoseBatch,
    scene: SceneLayout,
    cluster: Cluster | None,
    gripper: GripperSpec,
) -> list[PickPose]:
    batch = poses if isinstance(poses, PoseBatch) else PoseBatch.from_poses(poses)
    keep = ~collision_mask(batch, scene, gripper)
    return list(batch.take(np.flatnonzero(keep)))


def covers_hull(pose: PickPose, hull: ConvexPolygon, ega: EffectiveGrippingArea, tol: float = EPS) -> bool:
    """Whether the gripping area at ``pose`` contains every hull vertex."""
    lx, ly = _to_local(hull.vertices[:, 0] - pose.x, hull.vertices[:, 1] - pose.y, pose.gamma)
    return bool(
        np.all(np.abs(lx) <= ega.length_a / 2.0 + tol) and np.all(np.abs(ly) <= ega.width_b / 2.0 + tol)
    )

"""Pick-count predictors.

A predictor maps the local scene between the open fingers to confidences of
picking 0..m objects. Two implementations are provided: a deterministic
quasi-static closing simulation and a cheap center-band count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _closing
from .cluster import EffectiveGrippingArea
from .pose import PickPose, PoseBatch, boxes_hit, rotated_scene
from .scene import GRIPPERS, GripperSpec, PlacedObject, SceneLayout, ShapeSpec

log = logging.getLogger(__name__)

STEP = 0.5
TOL = 1e-3
MAX_ITER = 200


@dataclass(frozen=True)
class GrippingAreaScene:
    """Objects touching the gripping area, in the gripper frame of ``source_pose``.

    ``footprints`` holds each local object's outline vertices in the same frame.
    """

    ega: EffectiveGrippingArea
    shape: ShapeSpec
    local_objects: tuple[PlacedObject, ...]
    footprints: tuple[np.ndarray, ...] = field(repr=False)
    source_pose: PickPose | None = None
    gripper: GripperSpec | None = None

    @property
    def max_pick(self) -> int:
        return self.shape.max_pick

    @property
    def finger_length(self) -> float:
        return self.ega.length_a - self.shape.effective_length

    @property
    def finger_thickness(self) -> float:
        return self.gripper.finger_thickness if self.gripper else 10.0


@dataclass(frozen=True)
class PickPrediction:
    confidences: np.ndarray
    clamped: bool = False

    @property
    def count(self) -> int:
        # first maximum, i.e. ties go to the lower count
        return int(np.argmax(self.confidences))


def one_hot(count: int, m: int) -> np.ndarray:
    v = np.zeros(m + 1)
    v[count] = 1.0
    return v


def _local_parts(pose_lx, pose_ly, hit_row, rs):
    idx = np.flatnonzero(hit_row)
    centers = rs.centers[idx] - (pose_lx, pose_ly)
    verts = rs.verts[idx] - (pose_lx, pose_ly)
    return idx, centers, verts


def _ega_hits(batch: PoseBatch, scene: SceneLayout, ega: EffectiveGrippingArea, gamma, idx):
    rs = rotated_scene(scene, gamma)
    lx, ly = batch.lx[idx], batch.ly[idx]
    ha, hb = ega.length_a / 2.0, ega.width_b / 2.0
    if len(scene) == 0:
        return rs, np.zeros((len(idx), 0), dtype=bool)
    return rs, boxes_hit(rs, lx - ha, lx + ha, ly - hb, ly + hb)


def extract_gripping_area(
    pose: PickPose,
    scene: SceneLayout,
    ega: EffectiveGrippingArea,
    gripper: GripperSpec | None = None,
) -> GrippingAreaScene:
    """Objects whose footprints meet the gripping-area rectangle at ``pose``."""
    batch = PoseBatch([pose.x], [pose.y], [pose.gamma])
    rs, hits = _ega_hits(batch, scene, ega, pose.gamma, np.arange(1))
    shape = scene.shape
    if shape is None:
        raise ValueError("cannot extract a gripping area from an empty scene without a shape")
    idx, centers, verts = _local_parts(batch.lx[0], batch.ly[0], hits[0], rs)
    objs = tuple(
        PlacedObject(int(j), scene.objects[j].shape, float(cx), float(cy), scene.objects[j].theta - pose.gamma)
        for j, (cx, cy) in zip(idx, centers)
    )
    if gripper is None:
        gripper = GRIPPERS.get(shape.gripper)
    return GrippingAreaScene(ega, shape, objs, tuple(verts[:, : len(shape.outline)]), pose, gripper)


class Predictor:
    """Base class. Subclasses implement ``predict``; ``predict_batch`` may be
    overridden with a faster equivalent."""

    name = "base"
    chunk_size = 1 << 30

    def predict(self, local: GrippingAreaScene) -> PickPrediction:
        raise NotImplementedError

    def predict_batch(
        self,
        batch: PoseBatch,
        scene: SceneLayout,
        ega: EffectiveGrippingArea,
        gripper: GripperSpec,
        shape: ShapeSpec,
    ) -> np.ndarray:
        """Confidence rows, shape (len(batch), m + 1)."""
        out = np.zeros((len(batch), shape.max_pick + 1))
        for i, pose in enumerate(batch):
            out[i] = self.predict(extract_gripping_area(pose, scene, ega, gripper)).confidences
        return out

    def upper_bound(self, k: int, m: int) -> float:
        """Largest confidence this predictor can ever assign to count ``k``."""
        return 1.0


class ClosingOracle(Predictor):
    """Deterministic simulation of the fingers closing on the local scene."""

    name = "oracle"
    chunk_size = 24

    def __init__(self, step: float = STEP, tol: float = TOL, max_iter: int = MAX_ITER):
        self.step = step
        self.tol = tol
        self.max_iter = max_iter

    def _simulate(self, shape, centers, verts, ega, finger_length, thickness):
        hf = finger_length / 2.0
        he = ega.length_a / 2.0
        s0 = ega.width_b / 2.0
        if len(centers) == 0:
            return 0
        if shape.kind == "cuboid":
            v = np.ascontiguousarray(verts, dtype=float).copy()
            cx = np.ascontiguousarray(centers[:, 0], dtype=float).copy()
            _, _, held = _closing.close_polys(v, cx, hf, he, s0, thickness, self.step, self.tol, self.max_iter)
        else:
            x = np.ascontiguousarray(centers[:, 0], dtype=float).copy()
            y = np.ascontiguousarray(centers[:, 1], dtype=float).copy()
            r = np.full(len(x), shape.disc_radius)
            _, _, held = _closing.close_discs(x, y, r, hf, he, s0, thickness, self.step, self.tol, self.max_iter)
        return int(held.sum())

    def _to_prediction(self, count: int, m: int) -> PickPrediction:
        if count > m:
            log.debug("closing oracle counted %d objects, clamped to %d", count, m)
            return PickPrediction(one_hot(m, m), clamped=True)
        return PickPrediction(one_hot(count, m))

    def predict(self, local: GrippingAreaScene) -> PickPrediction:
        centers = np.array([[o.x, o.y] for o in local.local_objects], dtype=float).reshape(-1, 2)
        if len(centers) == 0:
            return self._to_prediction(0, local.max_pick)
        verts = np.array(local.footprints, dtype=float).reshape(len(centers), -1, 2)
        count = self._simulate(local.shape, centers, verts, local.ega, local.finger_length, local.finger_thickness)
        return self._to_prediction(count, local.max_pick)

    def count_batch(self, batch, scene, ega, gripper, shape) -> np.ndarray:
        """Unclamped held counts for every pose in ``batch``."""
        counts = np.zeros(len(batch), dtype=np.int64)
        if len(scene) == 0:
            return counts
        nv = len(shape.outline)
        hf = (ega.length_a - shape.effective_length) / 2.0
        for gamma, idx in batch.groups():
            rs, hits = _ega_hits(batch, scene, ega, gamma, idx)
            counts[idx] = _closing.count_batch(
                rs.centers[:, 0].copy(),
                rs.centers[:, 1].copy(),
                np.ascontiguousarray(rs.verts[:, :nv]),
                batch.lx[idx],
                batch.ly[idx],
                hits,
                0.0 if shape.kind == "cuboid" else shape.disc_radius,
                shape.kind == "cuboid",
                hf,
                ega.length_a / 2.0,
                ega.width_b / 2.0,
                gripper.finger_thickness,
                self.step,
                self.tol,
                self.max_iter,
            )
        return counts

    def predict_batch(self, batch, scene, ega, gripper, shape) -> np.ndarray:
        m = shape.max_pick
        counts = self.count_batch(batch, scene, ega, gripper, shape)
        out = np.zeros((len(batch), m + 1))
        out[np.arange(len(batch)), np.minimum(counts, m)] = 1.0
        return out


def closing_oracle_predict(local: GrippingAreaScene) -> PickPrediction:
    return ClosingOracle().predict(local)


def band_confidences(count: int, m: int) -> np.ndarray:
    """0.8 at ``count`` and 0.1 either side; mass past 0 or m folds back onto the peak."""
    c = min(max(count, 0), m)
    v = np.zeros(m + 1)
    v[c] = 0.8
    for nb in (c - 1, c + 1):
        if 0 <= nb <= m:
            v[nb] = 0.1
        else:
            v[c] += 0.1
    return v


class CenterBandHeuristic(Predictor):
    """Counts object centers inside a shrunken central band of the gripping area."""

    name = "heuristic"

    def _limits(self, ega: EffectiveGrippingArea, shape: ShapeSpec) -> tuple[float, float]:
        w = shape.effective_width
        return (ega.length_a - w) / 2.0, ega.width_b / 2.0 - w / 4.0

    def predict(self, local: GrippingAreaScene) -> PickPrediction:
        hx, hy = self._limits(local.ega, local.shape)
        count = sum(1 for o in local.local_objects if abs(o.x) <= hx and abs(o.y) <= hy)
        return PickPrediction(band_confidences(count, local.max_pick), clamped=count > local.max_pick)

    def predict_batch(self, batch, scene, ega, gripper, shape) -> np.ndarray:
        m = shape.max_pick
        hx, hy = self._limits(ega, shape)
        table = np.stack([band_confidences(c, m) for c in range(m + 1)])
        out = np.zeros((len(batch), m + 1))
        for gamma, idx in batch.groups():
            rs = rotated_scene(scene, gamma)
            dx = rs.centers[None, :, 0] - batch.lx[idx, None]
            dy = rs.centers[None, :, 1] - batch.ly[idx, None]
            counts = ((np.abs(dx) <= hx) & (np.abs(dy) <= hy)).sum(axis=1)
            out[idx] = table[np.minimum(counts, m)]
        return out

    def upper_bound(self, k: int, m: int) -> float:
        return float(max(band_confidences(c, m)[k] for c in range(m + 1)))


PREDICTORS = {"oracle": ClosingOracle, "heuristic": CenterBandHeuristic}


def get_predictor(name: str) -> Predictor:
    try:
        return PREDICTORS[name]()
    except KeyError:
        raise ValueError(f"unknown predictor {name!r} (choose from {sorted(PREDICTORS)})") from None


def confusion_matrix(
    locals_: list[GrippingAreaScene], reference: Predictor, other: Predictor
) -> tuple[np.ndarray, float]:
    """Count table of (reference argmax, other argmax) and their agreement rate."""
    if not locals_:
        raise ValueError("need at least one local scene")
    m = max(loc.max_pick for loc in locals_)
    table = np.zeros((m + 1, m + 1), dtype=np.int64)
    for loc in locals_:
        table[reference.predict(loc).count, other.predict(loc).count] += 1
    return table, float(np.trace(table)) / len(locals_)

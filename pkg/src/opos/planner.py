"""Action selection: ranked cluster search with a good-enough threshold,
simulated execution and the fall-back cascade over smaller counts."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .cluster import (
    Cluster,
    EffectiveGrippingArea,
    effective_gripping_area,
    filter_fitting_clusters,
    rank_clusters,
    with_crowd_index,
)
from .geometry import ConvexPolygon, penetration_vector
from .graph import DEFAULT_CLIQUE_CAP, NeighborGraph, build_graph, enumerate_cliques, neighbor_threshold
from .pose import PickPose, PoseBatch, collision_mask, sample_pose_batch
from .predictor import ClosingOracle, Predictor, extract_gripping_area, get_predictor
from .scene import GRIPPERS, GripperSpec, SceneLayout, ShapeSpec

log = logging.getLogger(__name__)

DEFAULT_HC = 0.9
MODES = ("threshold", "first_k")


class RequestError(ValueError):
    """Invalid planning request."""


@dataclass(frozen=True)
class PlanRequest:
    """One planning query.

    ``ranked`` orders clusters by (order, crowd index); otherwise enumeration
    order is used. ``mode`` is "threshold" for the usual early stop against
    ``h_c`` or "first_k" to return the first pose whose predicted count is k.
    """

    scene: SceneLayout
    k: int
    h_c: float = DEFAULT_HC
    shape: ShapeSpec | None = None
    gripper: GripperSpec | None = None
    predictor: str | Predictor = "oracle"
    ranked: bool = True
    mode: str = "threshold"

    def resolved(self) -> tuple[ShapeSpec, GripperSpec, Predictor]:
        shape = self.shape or self.scene.shape
        if shape is None:
            raise RequestError("an empty scene needs an explicit shape")
        gripper = self.gripper or GRIPPERS[shape.gripper]
        if not 1 <= self.k <= shape.max_pick:
            raise RequestError(f"k={self.k} outside 1..{shape.max_pick} for {shape.index_name}")
        if not 0.0 < self.h_c <= 1.0:
            raise RequestError(f"H_c must lie in (0, 1], got {self.h_c}")
        if self.mode not in MODES:
            raise RequestError(f"unknown mode {self.mode!r}")
        pred = get_predictor(self.predictor) if isinstance(self.predictor, str) else self.predictor
        return shape, gripper, pred


@dataclass(frozen=True)
class PlanResult:
    found: bool
    clusters_inspected: int
    pose: PickPose | None = None
    confidence: float = 0.0
    confidences: np.ndarray | None = field(default=None, repr=False)
    cluster: tuple[int, ...] = ()
    early_stop: bool = False

    @property
    def outcome(self) -> str:
        return "found" if self.found else "unavailable"

    @property
    def predicted_count(self) -> int:
        return -1 if self.confidences is None else int(np.argmax(self.confidences))


@dataclass(frozen=True)
class ExecutionResult:
    picked: int
    clamped: bool = False


@dataclass
class ClusterTrace:
    """Per-cluster bookkeeping used by the CLI trace."""

    members: tuple[int, ...]
    crowd_index: int
    sampled: int
    collision_free: int
    predicted: int
    best: float


class Planner:
    """Plans on one scene, caching the graph and clusters across requests."""

    def __init__(
        self,
        scene: SceneLayout,
        shape: ShapeSpec | None = None,
        gripper: GripperSpec | None = None,
        clique_cap: int = DEFAULT_CLIQUE_CAP,
    ):
        self.scene = scene
        self.shape = shape or scene.shape
        if self.shape is None:
            raise RequestError("an empty scene needs an explicit shape")
        self.gripper = gripper or GRIPPERS[self.shape.gripper]
        self.clique_cap = clique_cap
        self.h_d = neighbor_threshold(self.gripper, self.shape)
        self.ega: EffectiveGrippingArea = effective_gripping_area(self.gripper, self.shape)
        self._graph: NeighborGraph | None = None
        self._clusters: list[Cluster] | None = None
        self.n_cliques = 0
        self._poses: dict[tuple[int, ...], PoseBatch] = {}

    @property
    def graph(self) -> NeighborGraph:
        if self._graph is None:
            self._graph = build_graph(self.scene, self.h_d)
        return self._graph

    @property
    def clusters(self) -> list[Cluster]:
        """Every fitting clique with its crowd index, in enumeration order."""
        if self._clusters is None:
            cliques = enumerate_cliques(self.graph, 1, None, cap=self.clique_cap)
            self.n_cliques = len(cliques)
            kept = filter_fitting_clusters(cliques, self.scene, self.ega)
            self._clusters = with_crowd_index(kept, self.graph, self.h_d, self.shape.effective_width)
        return self._clusters

    def candidates(self, k: int, ranked: bool = True) -> list[Cluster]:
        if ranked:
            return rank_clusters(self.clusters, k)
        return [c for c in self.clusters if c.order >= k]

    def valid_poses(self, cluster: Cluster) -> tuple[int, PoseBatch]:
        """(sampled count, collision-free poses) for ``cluster``, cached."""
        hit = self._poses.get(cluster.members)
        if hit is None:
            batch = sample_pose_batch(cluster.hull, self.ega)
            n = len(batch)
            if n:
                batch = batch.take(np.flatnonzero(~collision_mask(batch, self.scene, self.gripper)))
            hit = self._poses[cluster.members] = (n, batch)
        return hit

    def select(
        self,
        k: int,
        predictor: Predictor | str = "oracle",
        h_c: float = DEFAULT_HC,
        ranked: bool = True,
        mode: str = "threshold",
        trace: list | None = None,
    ) -> PlanResult:
        req = PlanRequest(self.scene, k, h_c, self.shape, self.gripper, predictor, ranked, mode)
        _, _, pred = req.resolved()
        if len(self.scene) == 0:
            return PlanResult(False, 0)
        m = self.shape.max_pick
        ub = pred.upper_bound(k, m)
        inspected = 0
        backup: tuple | None = None
        for cl in self.candidates(k, ranked):
            inspected += 1
            n_sampled, poses = self.valid_poses(cl)
            best_i, best_c, best_row, n_pred = -1, 0.0, None, 0
            for lo in range(0, len(poses), pred.chunk_size):
                chunk = poses.take(np.arange(lo, min(lo + pred.chunk_size, len(poses))))
                rows = pred.predict_batch(chunk, self.scene, self.ega, self.gripper, self.shape)
                n_pred += len(rows)
                if mode == "first_k":
                    hits = np.flatnonzero(np.argmax(rows, axis=1) == k)
                    if len(hits):
                        i = int(hits[0])
                        best_i, best_c, best_row = lo + i, float(rows[i, k]), rows[i]
                        break
                    continue
                i = int(np.argmax(rows[:, k]))
                if rows[i, k] > best_c:
                    best_i, best_c, best_row = lo + i, float(rows[i, k]), rows[i]
                # nothing later in this cluster can beat the predictor's ceiling
                if best_c >= ub:
                    break
            if trace is not None:
                trace.append(ClusterTrace(cl.members, cl.crowd_index, n_sampled, len(poses), n_pred, best_c))
            if best_i < 0:
                continue
            result = PlanResult(True, inspected, poses[best_i], best_c, best_row, cl.members)
            if mode == "first_k" or best_c > h_c:
                return replace(result, early_stop=True)
            if backup is None or best_c > backup.confidence:
                backup = result
        if backup is None:
            return PlanResult(False, inspected)
        return replace(backup, clusters_inspected=inspected)

    def cascade(self, k: int, predictor: Predictor | str = "oracle", h_c: float = DEFAULT_HC) -> tuple[int, PlanResult]:
        """Plan for k, then k-1 and so on down to 1; (0, unavailable) if all fail."""
        result = PlanResult(False, 0)
        for p in range(k, 0, -1):
            result = self.select(p, predictor, h_c)
            if result.found:
                return p, result
        return 0, result


def select_action(req: PlanRequest) -> PlanResult:
    shape, gripper, pred = req.resolved()
    return Planner(req.scene, shape, gripper).select(req.k, pred, req.h_c, req.ranked, req.mode)


def cascade_plan(
    scene: SceneLayout,
    k: int,
    predictor: Predictor | str = "oracle",
    h_c: float = DEFAULT_HC,
    shape: ShapeSpec | None = None,
) -> tuple[int, PlanResult]:
    if len(scene) == 0:
        return 0, PlanResult(False, 0)
    return Planner(scene, shape).cascade(k, predictor, h_c)


def separate_once(scene: SceneLayout) -> SceneLayout:
    """One sweep that splits every pairwise footprint overlap evenly."""
    objs = list(scene.objects)
    if len(objs) < 2:
        return scene
    centers = scene.centers.copy()
    fps = [fp.vertices.copy() for fp in scene.footprints]
    reach = 2.0 * scene.radii.max()
    moved = False
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            if np.hypot(*(centers[j] - centers[i])) > reach:
                continue
            mtv = penetration_vector(ConvexPolygon(fps[i]), ConvexPolygon(fps[j]))
            if mtv is None:
                continue
            half = mtv / 2.0
            centers[i] -= half
            centers[j] += half
            fps[i] -= half
            fps[j] += half
            moved = True
    if not moved:
        return scene
    objs = [replace(o, x=float(c[0]), y=float(c[1])) for o, c in zip(objs, centers)]
    return SceneLayout(scene.bin_width, scene.bin_height, tuple(objs), scene.seed)


def jitter_scene(scene: SceneLayout, sigma: float, rng: np.random.Generator) -> SceneLayout:
    """Gaussian perturbation of every object center."""
    noise = rng.normal(0.0, sigma, size=(len(scene), 2))
    objs = tuple(
        replace(o, x=o.x + float(dx), y=o.y + float(dy)) for o, (dx, dy) in zip(scene.objects, noise)
    )
    return SceneLayout(scene.bin_width, scene.bin_height, objs, scene.seed)


def execution_rng(scene_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([scene_seed, trial]))


def execute(
    scene: SceneLayout,
    pose: PickPose,
    sigma: float = 2.0,
    seed: int | np.random.Generator = 0,
    shape: ShapeSpec | None = None,
    gripper: GripperSpec | None = None,
) -> ExecutionResult:
    """Close the gripper at ``pose`` on a perturbed copy of ``scene``.

    The closing oracle decides the outcome. With ``sigma == 0`` the planning
    scene is used unchanged.
    """
    shape = shape or scene.shape
    if shape is None:
        return ExecutionResult(0)
    gripper = gripper or GRIPPERS[shape.gripper]
    ega = effective_gripping_area(gripper, shape)
    world = scene
    if sigma > 0 and len(scene):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        world = separate_once(jitter_scene(scene, sigma, rng))
    batch = PoseBatch([pose.x], [pose.y], [pose.gamma])
    count = int(ClosingOracle().count_batch(batch, world, ega, gripper, shape)[0])
    m = shape.max_pick
    return ExecutionResult(min(count, m), clamped=count > m)


def local_scene(scene: SceneLayout, pose: PickPose, shape: ShapeSpec | None = None):
    shape = shape or scene.shape
    gripper = GRIPPERS[shape.gripper]
    return extract_gripping_area(pose, scene, effective_gripping_area(gripper, shape), gripper)


__all__ = [
    "DEFAULT_HC",
    "ExecutionResult",
    "PlanRequest",
    "PlanResult",
    "Planner",
    "RequestError",
    "cascade_plan",
    "execute",
    "execution_rng",
    "jitter_scene",
    "select_action",
    "separate_once",
]

"""Effective gripping area, cluster fit filtering, crowd index and ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .geometry import ConvexPolygon, OrientedRect, Point2, convex_hull, dims_fit, min_area_rect
from .graph import NeighborGraph
from .scene import GripperSpec, SceneLayout, ShapeSpec


@dataclass(frozen=True)
class EffectiveGrippingArea:
    """Region between the open fingers where object centers must lie.

    ``length_a`` runs along the fingers, ``width_b`` across the closing
    direction.
    """

    length_a: float
    width_b: float

    def as_rect(self, center=(0.0, 0.0), angle: float = 0.0) -> OrientedRect:
        return OrientedRect(Point2(*center), self.length_a, self.width_b, angle)


def effective_gripping_area(gripper: GripperSpec, obj: ShapeSpec) -> EffectiveGrippingArea:
    return EffectiveGrippingArea(gripper.finger_length + obj.effective_length, gripper.spread)


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    hull: ConvexPolygon
    min_rect: OrientedRect
    crowd_index: int = 0

    @property
    def order(self) -> int:
        return len(self.members)

    @property
    def rank_key(self) -> tuple:
        return (self.order, self.crowd_index, self.members)


def cluster_hull(members: Iterable[int], scene: SceneLayout) -> ConvexPolygon:
    fps = scene.footprints
    pts = np.concatenate([fps[i].vertices for i in members], axis=0)
    return convex_hull(pts)


def make_cluster(members: Sequence[int], scene: SceneLayout) -> Cluster:
    hull = cluster_hull(members, scene)
    return Cluster(tuple(members), hull, min_area_rect(hull))


def filter_fitting_clusters(
    cliques: Iterable[Sequence[int]],
    scene: SceneLayout,
    ega: EffectiveGrippingArea,
) -> list[Cluster]:
    """Keep the cliques whose cluster rectangle fits in the gripping area."""
    kept = []
    a, b = ega.length_a, ega.width_b
    for members in cliques:
        cl = make_cluster(members, scene)
        if dims_fit(cl.min_rect.length, cl.min_rect.width, a, b):
            kept.append(cl)
    return kept


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def edge_weight(d: float, h_d: float, w_eff: float) -> int:
    """Crowd weight of one external edge of length ``d``: 5 when touching, 1 far away."""
    if h_d <= w_eff:
        raise ValueError("neighbor threshold must exceed the object width")
    step = (h_d - w_eff) / 5.0
    w = 5 - _round_half_away((d - w_eff) / step)
    return min(5, max(1, w))


def crowd_index(members: Iterable[int], g: NeighborGraph, h_d: float, w_eff: float) -> int:
    """Sum of weights of the edges leaving the cluster."""
    inside = set(members)
    total = 0
    for i in inside:
        for j in g.adjacency[i]:
            if j not in inside:
                total += edge_weight(g.length(i, j), h_d, w_eff)
    return total


def with_crowd_index(
    clusters: Iterable[Cluster], g: NeighborGraph, h_d: float, w_eff: float
) -> list[Cluster]:
    return [replace(c, crowd_index=crowd_index(c.members, g, h_d, w_eff)) for c in clusters]


def rank_clusters(clusters: Iterable[Cluster], k: int) -> list[Cluster]:
    """Order-k clusters first, then k+1 and so on; least crowded first within an order."""
    return sorted((c for c in clusters if c.order >= k), key=lambda c: c.rank_key)

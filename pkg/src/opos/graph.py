"""Neighbor graph over object centers and clique enumeration."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import EPS
from .scene import CapacityError, GripperSpec, SceneLayout, ShapeSpec

DEFAULT_CLIQUE_CAP = 1_000_000


def neighbor_threshold(gripper: GripperSpec, obj: ShapeSpec) -> float:
    """Largest center distance at which two objects can still be picked together.

    The extreme pair sits at diagonal corners of the open gripper, so the
    distance spans the finger length one way and the spread less one object
    width the other way.
    """
    w = obj.effective_width
    if w > gripper.spread + EPS:
        raise ValueError(f"{obj.index_name} ({w} mm) is wider than the gripper spread")
    slack = max(gripper.spread - w, 0.0)
    return math.hypot(gripper.finger_length, slack)


@dataclass(frozen=True)
class NeighborGraph:
    n: int
    node_centers: np.ndarray
    edges: dict[tuple[int, int], float]
    adjacency: tuple[frozenset, ...] = field(repr=False)

    def has_edge(self, i: int, j: int) -> bool:
        if i > j:
            i, j = j, i
        return (i, j) in self.edges

    def length(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        return self.edges[(i, j)]

    def neighbors(self, i: int) -> frozenset:
        return self.adjacency[i]


def graph_from_edges(n: int, edges: dict[tuple[int, int], float], centers=None) -> NeighborGraph:
    adj: list[set] = [set() for _ in range(n)]
    norm = {}
    for (i, j), w in edges.items():
        if i == j:
            raise ValueError("self-loops are not allowed")
        a, b = min(i, j), max(i, j)
        norm[(a, b)] = float(w)
        adj[a].add(b)
        adj[b].add(a)
    if centers is None:
        centers = np.full((n, 2), np.nan)
    return NeighborGraph(n, np.asarray(centers, dtype=float), norm, tuple(frozenset(s) for s in adj))


def build_graph(scene: SceneLayout, h_d: float) -> NeighborGraph:
    """Connect every pair of objects whose centers are at most ``h_d`` apart."""
    c = scene.centers
    n = len(c)
    d = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
    ii, jj = np.nonzero(np.triu(d <= h_d + EPS, 1))
    edges = {(int(i), int(j)): float(d[i, j]) for i, j in zip(ii, jj)}
    return graph_from_edges(n, edges, c)


def enumerate_cliques(
    g: NeighborGraph,
    k_min: int = 1,
    k_max: int | None = None,
    cap: int = DEFAULT_CLIQUE_CAP,
) -> list[tuple[int, ...]]:
    """Every clique (maximal or not) with ``k_min <= size <= k_max``.

    Cliques grow breadth-first from each node using only higher-numbered
    common neighbors, so each vertex set is produced exactly once. The result
    is sorted by (size, members).
    """
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    if k_max is None:
        k_max = g.n
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    higher = [sorted(v for v in g.adjacency[u] if v > u) for u in range(g.n)]
    higher_sets = [set(h) for h in higher]
    out: list[tuple[int, ...]] = []
    queue = deque(((u,), higher[u]) for u in range(g.n))
    while queue:
        base, cand = queue.popleft()
        if len(base) >= k_min:
            out.append(base)
            if len(out) > cap:
                raise CapacityError(f"more than {cap} cliques in the neighbor graph")
        if len(base) == k_max:
            continue
        for i, u in enumerate(cand):
            nxt = [v for v in cand[i + 1 :] if v in higher_sets[u]]
            queue.append((base + (u,), nxt))
    out.sort(key=lambda c: (len(c), c))
    return out


def is_clique(g: NeighborGraph, members) -> bool:
    m = list(members)
    return all(g.has_edge(m[i], m[j]) for i in range(len(m)) for j in range(i + 1, len(m)))

"""Waypoint graph over skeleton pixels (8-connectivity) with Dijkstra queries."""

from __future__ import annotations

import heapq
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .map_reader import WaypointSet

_FORWARD = ((0, 1), (1, -1), (1, 0), (1, 1))


class GraphValidationError(ValueError):
    pass


class NoPathError(LookupError):
    def __init__(self, source: int, target: int, source_component: int, target_component: int):
        super().__init__(
            f"no path from vertex {source} (component {source_component}) "
            f"to vertex {target} (component {target_component})"
        )
        self.source = source
        self.target = target
        self.source_component = source_component
        self.target_component = target_component


@dataclass(eq=False)
class WaypointGraph:
    points: np.ndarray
    pixels: np.ndarray
    resolution: float
    adjacency: list[list[tuple[int, float]]]
    _components: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> list[int]:
        return [u for u, _ in self.adjacency[v]]

    def edges(self):
        """Yield (i, j, weight) once per undirected edge with i < j."""
        for i, nbrs in enumerate(self.adjacency):
            for j, w in nbrs:
                if i < j:
                    yield i, j, w

    @property
    def components(self) -> np.ndarray:
        """Component id per vertex, numbered by lowest member index."""
        if self._components is None:
            comp = np.full(len(self), -1, dtype=np.int64)
            cid = 0
            for s in range(len(self)):
                if comp[s] >= 0:
                    continue
                comp[s] = cid
                stack = [s]
                while stack:
                    v = stack.pop()
                    for u, _ in self.adjacency[v]:
                        if comp[u] < 0:
                            comp[u] = cid
                            stack.append(u)
                cid += 1
            self._components = comp
        return self._components

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1 if len(self) else 0


def build_graph(waypoints: WaypointSet, resolution: float | None = None) -> WaypointGraph:
    """Connect waypoints whose source pixels are 8-neighbours.

    Edge weights are Euclidean distances between the world points.
    """
    res = float(resolution if resolution is not None else waypoints.resolution)
    pixels = np.asarray(waypoints.pixels, dtype=np.int64).reshape(-1, 2)
    points = np.asarray(waypoints.points, dtype=float).reshape(-1, 2)
    n = len(pixels)
    adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    if n == 0:
        return WaypointGraph(points, pixels, res, adjacency)

    rows = pixels[:, 0] - pixels[:, 0].min() + 1
    cols = pixels[:, 1] - pixels[:, 1].min() + 1
    span = int(cols.max()) + 2
    keys = rows * span + cols
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    dup = np.flatnonzero(sorted_keys[1:] == sorted_keys[:-1])
    if dup.size:
        a, b = order[dup[0]], order[dup[0] + 1]
        raise GraphValidationError(
            f"waypoints {min(a, b)} and {max(a, b)} share pixel {tuple(pixels[a].tolist())}"
        )

    src, dst = [], []
    for dr, dc in _FORWARD:
        target = keys + dr * span + dc
        pos = np.searchsorted(sorted_keys, target)
        pos = np.minimum(pos, n - 1)
        hit = sorted_keys[pos] == target
        src.append(np.flatnonzero(hit))
        dst.append(order[pos[hit]])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    weights = np.hypot(*(points[src] - points[dst]).T)
    for i, j, w in zip(src.tolist(), dst.tolist(), weights.tolist()):
        adjacency[i].append((j, w))
        adjacency[j].append((i, w))
    for nbrs in adjacency:
        nbrs.sort()
    return WaypointGraph(points, pixels, res, adjacency)


def find_leaves(graph: WaypointGraph) -> list[int]:
    """Vertices of degree 1, plus isolated vertices, in index order."""
    return [v for v in range(len(graph)) if len(graph.adjacency[v]) <= 1]


def _distances_to(graph: WaypointGraph, target: int, stop_at: int) -> dict[int, float]:
    """Dijkstra from ``target``; returns settled distances.

    Stops once every vertex no farther than ``stop_at`` is settled.
    """
    dist = {target: 0.0}
    settled: dict[int, float] = {}
    heap = [(0.0, target)]
    limit = math.inf
    while heap:
        d, v = heapq.heappop(heap)
        if v in settled:
            continue
        if d > limit:
            break
        settled[v] = d
        if v == stop_at:
            limit = d * (1 + 1e-9) + 1e-12
        for u, w in graph.adjacency[v]:
            nd = d + w
            if u not in settled and nd < dist.get(u, math.inf):
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return settled


def _lexmin_path(graph: WaypointGraph, source: int, target: int) -> list[int]:
    dist = _distances_to(graph, target, source)
    if source not in dist:
        comp = graph.components
        raise NoPathError(source, target, int(comp[source]), int(comp[target]))
    tol = 1e-9 * max(1.0, dist[source])
    path = [source]
    v = source
    while v != target:
        dv = dist[v]
        for u, w in graph.adjacency[v]:  # sorted by index
            du = dist.get(u)
            if du is not None and du < dv and abs(w + du - dv) <= tol:
                v = u
                break
        else:  # pragma: no cover - unreachable with positive weights
            raise RuntimeError("shortest-path reconstruction failed")
        path.append(v)
    return path


def shortest_path(graph: WaypointGraph, source: int, target: int) -> list[int]:
    """Minimum-weight vertex path from ``source`` to ``target``, endpoints included.

    Among equal-weight paths, the one whose index sequence read from the
    lower-numbered endpoint is lexicographically smallest wins, so swapping
    the endpoints returns the same path reversed.
    """
    n = len(graph)
    for v in (source, target):
        if not 0 <= v < n:
            raise IndexError(f"vertex {v} not in graph of {n} vertices")
    if source == target:
        return [source]
    if source < target:
        return _lexmin_path(graph, source, target)
    return _lexmin_path(graph, target, source)[::-1]


def path_weight(graph: WaypointGraph, path: list[int]) -> float:
    total = 0.0
    for a, b in zip(path, path[1:]):
        w = dict(graph.adjacency[a]).get(b)
        if w is None:
            raise GraphValidationError(f"vertices {a} and {b} are not adjacent")
        total += w
    return total


def write_graph(path: str | os.PathLike, graph: WaypointGraph) -> Path:
    """Edge list ``i j weight`` preceded by a vertex table."""
    lines = [f"# vertices {len(graph)} resolution {graph.resolution!r}"]
    for i, ((x, y), (r, c)) in enumerate(zip(graph.points.tolist(), graph.pixels.tolist())):
        lines.append(f"v {i} {x!r} {y!r} {r} {c}")
    lines.append(f"# edges {graph.n_edges}")
    lines += [f"{i} {j} {w!r}" for i, j, w in graph.edges()]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

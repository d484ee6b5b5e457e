"""Leaf-traversal coverage planner and path splicing.

The planner starts at the leaf nearest to the robot, repeatedly moves to the
nearest unvisited leaf (straight-line distance) along the graph shortest
path, and keeps each vertex only the first time it appears. The resulting
vertex sequence is then thinned to every ``D/R``-th element.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import WaypointGraph, find_leaves, shortest_path

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerParams:
    waypoint_spacing: float = 1.0
    start_position: tuple[float, float] = (0.0, 0.0)


@dataclass
class PlannedPath:
    full_path: list[int]
    spliced_indices: list[int]
    spliced_path: np.ndarray
    stride: int
    unplanned_components: list[int] = field(default_factory=list)
    vertex_coverage: float = 1.0

    @property
    def spliced_vertices(self) -> list[int]:
        return [self.full_path[i] for i in self.spliced_indices]


def stride_for(spacing: float, resolution: float) -> int:
    """Integer splice stride: D / R rounded half-up, at least 1."""
    return max(1, int(math.floor(spacing / resolution + 0.5)))


def find_nearest_leaf(position: Sequence[float], candidates: Iterable[int], points: np.ndarray) -> int:
    """Candidate with the smallest Euclidean distance to ``position``.

    Candidates are scanned in ascending index order with a strict ``<``, so
    ties resolve to the lowest index.
    """
    cand = sorted(candidates)
    if not cand:
        raise ValueError("no candidate leaves to choose from")
    idx = np.asarray(cand)
    diff = points[idx] - np.asarray(position, dtype=float)
    d = np.hypot(diff[:, 0], diff[:, 1])
    return int(idx[int(np.argmin(d))])


def _leafless_walk(graph: WaypointGraph, seed: int) -> list[int]:
    """Depth-first preorder from ``seed``; traverses a plain cycle once."""
    order, seen, stack = [], set(), [seed]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        order.append(v)
        stack.extend(u for u in reversed(graph.neighbors(v)) if u not in seen)
    return order


def _cover_component(graph, leaves, entry, path, in_path):
    """Visit every leaf of one component starting at leaf ``entry``."""
    remaining = set(leaves)
    current = entry
    remaining.discard(current)
    if current not in in_path:
        in_path.add(current)
        path.append(current)
    while remaining:
        target = find_nearest_leaf(graph.points[current], remaining, graph.points)
        for v in shortest_path(graph, current, target):
            if v not in in_path:
                in_path.add(v)
                path.append(v)
        remaining.discard(target)
        current = target
    return current


def _component_entry(graph, comp_leaves, comp, position, pending):
    """Nearest leaf over pending components; leafless ones only once none have leaves."""
    best = None
    with_leaves = [c for c in pending if c in comp_leaves]
    for c in sorted(with_leaves or pending):
        pool = comp_leaves.get(c) or np.flatnonzero(comp == c).tolist()
        v = find_nearest_leaf(position, pool, graph.points)
        d = float(np.hypot(*(graph.points[v] - position)))
        if best is None or d < best[0] or (d == best[0] and v < best[1]):
            best = (d, v, c)
    return best[1], best[2]


def plan(graph: WaypointGraph, params: PlannerParams, all_components: bool = False) -> PlannedPath:
    """Order the graph's vertices into a coverage path and splice it.

    On a disconnected graph only the component holding the starting leaf is
    planned unless ``all_components`` is set, in which case components are
    chained by nearest-leaf hops.
    """
    if params.waypoint_spacing < graph.resolution:
        raise ValueError(
            f"waypoint spacing {params.waypoint_spacing} is below the map resolution {graph.resolution}"
        )
    stride = stride_for(params.waypoint_spacing, graph.resolution)
    if len(graph) == 0:
        return PlannedPath([], [], np.zeros((0, 2)), stride, [], 1.0)

    x0 = np.asarray(params.start_position, dtype=float)
    comp = graph.components
    comp_leaves: dict[int, list[int]] = {}
    for v in find_leaves(graph):
        comp_leaves.setdefault(int(comp[v]), []).append(v)

    path: list[int] = []
    in_path: set[int] = set()
    pending = set(range(graph.n_components))
    position = x0
    while pending:
        entry, c = _component_entry(graph, comp_leaves, comp, position, pending)
        pending.discard(c)
        if c in comp_leaves:
            last = _cover_component(graph, comp_leaves[c], entry, path, in_path)
        else:
            for v in _leafless_walk(graph, entry):
                if v not in in_path:
                    in_path.add(v)
                    path.append(v)
            last = path[-1]
        position = graph.points[last]
        if not all_components:
            break

    unplanned = sorted(pending)
    if unplanned:
        log.warning(
            "graph has %d components; %d left unplanned", graph.n_components, len(unplanned)
        )
    result = splice(path, params.waypoint_spacing / graph.resolution, graph.points)
    result.unplanned_components = unplanned
    result.vertex_coverage = len(path) / len(graph)
    return result


def splice(path: Sequence[int] | PlannedPath, stride_divisor: float, points: np.ndarray) -> PlannedPath:
    """Keep elements 0, s, 2s, ..., s * floor((|P| - 1) / s) of the path.

    ``stride_divisor`` is D / R; it is rounded half-up and floored at 1.
    ``points`` holds the world coordinates of every graph vertex.
    """
    full = list(path.full_path if isinstance(path, PlannedPath) else path)
    s = max(1, int(math.floor(stride_divisor + 0.5)))
    if not full:
        return PlannedPath([], [], np.zeros((0, 2)), s)
    indices = list(range(0, (len(full) - 1) // s * s + 1, s))
    pts = np.asarray(points, dtype=float)[[full[i] for i in indices]]
    return PlannedPath(full, indices, pts.reshape(-1, 2), s)


@dataclass(frozen=True)
class PathSummary:
    count: int
    total_length: float
    mean_spacing: float | None
    min_spacing: float | None
    max_spacing: float | None
    spacings: tuple[float, ...] = ()


def path_metrics(path: PlannedPath | np.ndarray) -> PathSummary:
    pts = path.spliced_path if isinstance(path, PlannedPath) else np.asarray(path, dtype=float)
    pts = pts.reshape(-1, 2)
    if len(pts) < 2:
        return PathSummary(len(pts), 0.0, None, None, None)
    gaps = np.hypot(*np.diff(pts, axis=0).T)
    return PathSummary(
        len(pts), float(gaps.sum()), float(gaps.mean()), float(gaps.min()), float(gaps.max()),
        tuple(gaps.tolist()),
    )


def write_path(path_file: str | os.PathLike, planned: PlannedPath, spacing: float,
               resolution: float, start: Sequence[float]) -> Path:
    lines = [
        f"# path {len(planned.spliced_path)} spacing {spacing!r} resolution {resolution!r} "
        f"start {float(start[0])!r} {float(start[1])!r}"
    ]
    lines += [f"{x!r} {y!r}" for x, y in planned.spliced_path.tolist()]
    path_file = Path(path_file)
    path_file.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path_file


@dataclass(frozen=True)
class PathFile:
    points: np.ndarray
    spacing: float
    resolution: float
    start: tuple[float, float]


def read_path(path_file: str | os.PathLike) -> PathFile:
    text = Path(path_file).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# path"):
        raise ValueError(f"{path_file}: missing path header")
    head = text[0].split()
    try:
        count = int(head[2])
        spacing = float(head[head.index("spacing") + 1])
        res = float(head[head.index("resolution") + 1])
        i = head.index("start")
        start = (float(head[i + 1]), float(head[i + 2]))
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path_file}: malformed path header") from exc
    rows = [ln.split() for ln in text[1:] if ln.strip() and not ln.startswith("#")]
    pts = np.array([[float(a), float(b)] for a, b in rows], dtype=float).reshape(-1, 2)
    if len(pts) != count:
        raise ValueError(f"{path_file}: header says {count} points, found {len(pts)}")
    return PathFile(pts, spacing, res, start)

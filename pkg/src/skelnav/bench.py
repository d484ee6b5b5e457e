"""Timing harness for the map reader and the planner.

Only the in-memory pipeline is timed; map generation and file I/O happen
before the clock starts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .graph import build_graph
from .map_reader import ReaderParams, WaypointSet, extract_waypoints, run_stages
from .planner import PlannerParams, plan
from .synthetic import generate_synthetic_map


@dataclass(frozen=True)
class BenchRecord:
    size: int  # pixels or waypoints
    iterations: int
    mean: float  # seconds
    std: float


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r: float


def time_call(fn: Callable[[], object], iterations: int) -> tuple[float, float]:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    samples = np.empty(iterations)
    for i in range(iterations):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    return float(samples.mean()), float(samples.std())


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> LinearFit | None:
    """Least-squares line; None with fewer than two distinct sizes."""
    if len(set(xs)) < 2:
        return None
    res = stats.linregress(np.asarray(xs, float), np.asarray(ys, float))
    return LinearFit(float(res.slope), float(res.intercept), float(res.rvalue))


def bench_read_map(sizes: Sequence[int] = (100, 200, 400, 800), iterations: int = 100,
                   kind: str = "l_room", params: ReaderParams = ReaderParams(),
                   seed: int = 0) -> list[BenchRecord]:
    """Time the full reader pipeline on square maps of each side length."""
    out = []
    for side in sizes:
        grid = generate_synthetic_map(kind, int(side), seed=seed)
        mean, std = time_call(lambda: extract_waypoints(run_stages(grid, params)["skeleton"]), iterations)
        out.append(BenchRecord(grid.width * grid.height, iterations, mean, std))
    return out


def skeleton_waypoints(n: int, resolution: float = 0.10) -> WaypointSet:
    """A comb-shaped pixel skeleton with exactly ``n`` pixels and four leaves."""
    if n < 1:
        raise ValueError("need at least one waypoint")
    branch = n // 6 if n >= 24 else 0
    spine = n - 3 * branch
    pix = [(0, c) for c in range(spine)]
    for k in (1, 2, 3):
        c = k * spine // 4
        pix += [(r, c) for r in range(2, branch + 2)] if branch else []
    pixels = np.array(pix, dtype=np.int64).reshape(-1, 2)
    # branches start one row below the spine gap so each joins via a single pixel
    pixels[len(pixels) - 3 * branch:, 0] -= 1
    points = pixels[:, ::-1].astype(float) * resolution
    return WaypointSet(points, pixels, resolution)


def bench_plan(counts: Sequence[int] = (10, 100, 1000, 10000), iterations: int = 500,
               spacing: float = 1.0, seed: int = 0) -> list[BenchRecord]:
    """Time graph construction plus planning on comb skeletons of each size."""
    out = []
    for n in counts:
        wps = skeleton_waypoints(int(n))
        params = PlannerParams(spacing, (float(wps.points[0, 0]), float(wps.points[0, 1])))
        mean, std = time_call(lambda: plan(build_graph(wps), params), iterations)
        out.append(BenchRecord(len(wps), iterations, mean, std))
    return out


def format_bench(records: Sequence[BenchRecord], unit: str, fit: LinearFit | None) -> str:
    lines = [f"{'size (' + unit + ')':>16}  {'N':>5}  {'mean (ms)':>10}  {'std (ms)':>9}"]
    for r in records:
        lines.append(f"{r.size:>16d}  {r.iterations:>5d}  {r.mean * 1e3:>10.3f}  {r.std * 1e3:>9.3f}")
    if fit is not None:
        lines.append(
            f"slope {fit.slope * 1e9:.3f} ns/{unit.rstrip('s')}  intercept {fit.intercept * 1e3:.3f} ms  r {fit.r:.4f}"
        )
    return "\n".join(lines) + "\n"

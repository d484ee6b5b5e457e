"""Static figures for the pipeline, the plan, benchmarks and missions."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import BenchRecord, LinearFit  # noqa: E402
from .map_io import OccupancyGrid  # noqa: E402
from .map_reader import STAGE_NAMES  # noqa: E402
from .navigator import RunLog  # noqa: E402
from .planner import PathSummary  # noqa: E402


def _save(fig, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def _extent(grid: OccupancyGrid, axis_order: str = "row_col"):
    # pixel (i, j) maps to (R*i + ox, R*j + oy) in row_col order
    r, (ox, oy) = grid.resolution, grid.origin
    if axis_order == "row_col":
        return (oy - r / 2, oy + r * (grid.width - 0.5), ox - r / 2, ox + r * (grid.height - 0.5))
    return (ox - r / 2, ox + r * (grid.width - 0.5), oy - r / 2, oy + r * (grid.height - 0.5))


def _show_grid(ax, grid: OccupancyGrid, axis_order: str = "row_col"):
    # row_col: x runs down the rows, so plot y on the horizontal axis
    ax.imshow(grid.cells, cmap="gray", vmin=0, vmax=255, origin="lower", extent=_extent(grid, axis_order))


def _xy(points: np.ndarray, axis_order: str):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if axis_order == "row_col":
        return pts[:, 1], pts[:, 0]
    return pts[:, 0], pts[:, 1]


def plot_stages(stages: Mapping[str, OccupancyGrid], path) -> Path:
    names = [n for n in STAGE_NAMES if n in stages]
    fig, axes = plt.subplots(2, 3, figsize=(10, 7))
    for ax, name in zip(axes.flat, names):
        ax.imshow(stages[name].cells, cmap="gray", vmin=0, vmax=255)
        ax.set_title(name)
        ax.set_axis_off()
    for ax in list(axes.flat)[len(names):]:
        ax.set_axis_off()
    return _save(fig, path)


def plot_path(grid: OccupancyGrid, waypoints: np.ndarray, spliced: np.ndarray, path,
              start: Sequence[float] | None = None, axis_order: str = "row_col") -> Path:
    fig, ax = plt.subplots(figsize=(7, 7))
    _show_grid(ax, grid, axis_order)
    u, v = _xy(waypoints, axis_order)
    ax.plot(u, v, ".", ms=2, color="tab:blue", label="waypoints")
    u, v = _xy(spliced, axis_order)
    ax.plot(u, v, "-o", ms=4, lw=1, color="tab:red", label="spliced path")
    if len(u):
        ax.annotate("1", (u[0], v[0]), color="tab:red")
    if start is not None:
        u, v = _xy(np.asarray(start), axis_order)
        ax.plot(u, v, "*", ms=12, color="tab:green", label="start")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("y (m)" if axis_order == "row_col" else "x (m)")
    ax.set_ylabel("x (m)" if axis_order == "row_col" else "y (m)")
    return _save(fig, path)


def plot_spacing(summary: PathSummary, spacing: float, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    if summary.spacings:
        ax.hist(summary.spacings, bins=20, color="tab:blue")
        ax.axvline(summary.mean_spacing, color="k", ls="--", label=f"mean {summary.mean_spacing:.2f} m")
    ax.axvline(spacing, color="tab:red", ls=":", label=f"target {spacing:.2f} m")
    ax.set_xlabel("consecutive waypoint distance (m)")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_bench(records: Sequence[BenchRecord], fit: LinearFit | None, path, xlabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.array([r.size for r in records], float)
    y = np.array([r.mean for r in records]) * 1e3
    e = np.array([r.std for r in records]) * 1e3
    ax.errorbar(x, y, yerr=e, fmt="o", capsize=3)
    if fit is not None:
        xs = np.linspace(0, x.max(), 50)
        ax.plot(xs, (fit.slope * xs + fit.intercept) * 1e3, "--", label=f"fit r={fit.r:.3f}")
        ax.legend(fontsize=8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mean time (ms)")
    return _save(fig, path)


def plot_waypoint_times(log: RunLog, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for flag, color, label in ((True, "tab:blue", "reached"), (False, "tab:red", "unreached")):
        recs = [w for w in log.waypoints if w.reached is flag]
        ax.plot([w.index for w in recs], [w.duration for w in recs], "o", color=color, label=label)
    assisted = [w for w in log.waypoints if w.assisted]
    if assisted:
        ax.plot([w.index for w in assisted], [w.duration for w in assisted], "s", mfc="none",
                color="k", ms=9, label="assisted")
    ax.set_xlabel("waypoint")
    ax.set_ylabel("time to waypoint (s)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_trajectory(grid: OccupancyGrid, trace, goals: np.ndarray, path,
                    axis_order: str = "row_col") -> Path:
    fig, ax = plt.subplots(figsize=(7, 7))
    _show_grid(ax, grid, axis_order)
    true_xy = np.array([(r.x, r.y) for r in trace]).reshape(-1, 2)
    perc_xy = np.array([(r.px, r.py) for r in trace]).reshape(-1, 2)
    ax.plot(*_xy(true_xy, axis_order), lw=1, color="tab:blue", label="true")
    if not np.allclose(true_xy, perc_xy):
        ax.plot(*_xy(perc_xy, axis_order), lw=1, ls="--", color="tab:orange", label="perceived")
    ax.plot(*_xy(goals, axis_order), "o", ms=4, color="tab:red", label="goals")
    ax.set_xlabel("y (m)" if axis_order == "row_col" else "x (m)")
    ax.set_ylabel("x (m)" if axis_order == "row_col" else "y (m)")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)

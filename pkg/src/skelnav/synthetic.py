"""Deterministic tri-level test maps: L-rooms, corridors, annuli, rectilinear rooms."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .map_io import FREE, OCCUPIED, UNKNOWN, OccupancyGrid

KINDS = ("l_room", "corridor", "annulus", "rooms")
MIN_SIZE = 16


def _as_shape(size) -> tuple[int, int]:
    if np.isscalar(size):
        return int(size), int(size)
    h, w = size
    return int(h), int(w)


def _l_room(h, w, m, rng, opts):
    free = np.zeros((h, w), dtype=bool)
    free[m:h - m, m:w - m] = True
    # cut the top-right quadrant to make the room non-convex
    cut_r = int(opts.get("cut", 0.5) * (h - 2 * m)) + m
    cut_c = int(opts.get("cut", 0.5) * (w - 2 * m)) + m
    free[:cut_r, cut_c:] = False
    return free


def _corridor(h, w, m, rng, opts):
    width = int(opts.get("width", 24))
    free = np.zeros((h, w), dtype=bool)
    mid = h // 2
    top = mid - width // 2
    free[top:top + width, m:w - m] = True
    if opts.get("branch", True) and width < h - 2 * m:
        c = (w - width) // 2 + int(opts.get("branch_offset", 0))
        free[m:mid, c:c + width] = True
    return free


def _annulus(h, w, m, rng, opts):
    free = np.zeros((h, w), dtype=bool)
    free[m:h - m, m:w - m] = True
    ring = int(opts.get("ring", max(12, min(h, w) // 5)))
    free[m + ring:h - m - ring, m + ring:w - m - ring] = False
    return free


def _rooms(h, w, m, rng, opts):
    """Union of random axis-aligned rectangles grown from a central seed."""
    free = np.zeros((h, w), dtype=bool)
    inner_h, inner_w = h - 2 * m, w - 2 * m
    min_side = max(12, int(opts.get("min_side", min(inner_h, inner_w) // 6)))
    r0, c0 = h // 2 - min_side, w // 2 - min_side
    free[r0:r0 + 2 * min_side, c0:c0 + 2 * min_side] = True
    for _ in range(int(opts.get("n_rects", 6))):
        rh = int(rng.integers(min_side, max(min_side + 1, inner_h // 2)))
        rw = int(rng.integers(min_side, max(min_side + 1, inner_w // 2)))
        rows, cols = np.nonzero(free)
        k = int(rng.integers(len(rows)))
        top = int(np.clip(rows[k] - rng.integers(rh), m, h - m - rh))
        left = int(np.clip(cols[k] - rng.integers(rw), m, w - m - rw))
        free[top:top + rh, left:left + rw] = True
    return free


_BUILDERS = {"l_room": _l_room, "corridor": _corridor, "annulus": _annulus, "rooms": _rooms}


def generate_synthetic_map(kind: str = "l_room", size=200, resolution: float = 0.10, seed: int = 0,
                           origin: tuple[float, float] = (0.0, 0.0), wall: int = 2, margin: int = 4,
                           fringe: float = 0.02, **opts) -> OccupancyGrid:
    """Build a tri-level map of the given shape family.

    Free space is walled by ``wall`` occupied pixels; everything beyond the
    walls is unknown. ``fringe`` is the probability that a free pixel touching
    a wall is turned unknown, mimicking occlusion shadows.
    """
    if kind not in _BUILDERS:
        raise ValueError(f"unknown map kind {kind!r}; choose from {KINDS}")
    h, w = _as_shape(size)
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ValueError(f"map must be at least {MIN_SIZE}x{MIN_SIZE} pixels, got {h}x{w}")
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    rng = np.random.default_rng(seed)
    m = margin + wall
    free = _BUILDERS[kind](h, w, m, rng, opts)
    walls = ndimage.binary_dilation(free, np.ones((3, 3), bool), iterations=wall) & ~free
    cells = np.full((h, w), UNKNOWN, dtype=np.uint8)
    cells[walls] = OCCUPIED
    cells[free] = FREE
    if fringe > 0:
        edge = free & ndimage.binary_dilation(walls, np.ones((3, 3), bool))
        shadow = edge & (rng.random((h, w)) < fringe)
        cells[shadow] = UNKNOWN
    return OccupancyGrid(cells, resolution, origin, name=f"{kind}-{h}x{w}-s{seed}")


def free_point(grid: OccupancyGrid, near: tuple[int, int] | None = None,
               clearance_px: int = 6, axis_order: str = "row_col") -> tuple[float, float]:
    """World coordinates of a free cell with at least ``clearance_px`` free pixels around it.

    Picks the qualifying cell closest to pixel ``near`` (default: top-left).
    """
    free = grid.cells == FREE
    k = 2 * clearance_px + 1
    ok = ndimage.minimum_filter(free.astype(np.uint8), size=k, mode="constant", cval=0).astype(bool)
    rows, cols = np.nonzero(ok)
    if rows.size == 0:
        raise ValueError("no free cell with the requested clearance")
    nr, nc = near if near is not None else (0, 0)
    i = int(np.argmin((rows - nr) ** 2 + (cols - nc) ** 2))
    x, y = grid.pixel_to_world(rows[i], cols[i], axis_order)
    return float(x), float(y)

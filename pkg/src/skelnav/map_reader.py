"""Morphological map reader: occupancy map -> skeleton waypoints.

Pipeline: fold unknown into occupied, Gaussian smoothing, thresholding,
largest-contour fill, square-kernel erosion, Zhang-Suen thinning, and the
pixel-to-world transform of every skeleton pixel.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .map_io import FREE, OCCUPIED, MapError, MapMetadata, OccupancyGrid, save_stage

STAGE_NAMES = ("original", "adjusted", "fuzzied", "contour", "eroded", "skeleton")

_EIGHT = np.ones((3, 3), dtype=bool)


class EmptyMapError(MapError):
    """Raised when a stage leaves no free space to work with."""

    def __init__(self, message: str, stage: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class ReaderParams:
    sigma: int = 3
    kappa: int = 128
    erosion_k: int = 10

    def __post_init__(self):
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise ValueError(f"sigma must be an integer >= 1, got {self.sigma}")
        if not 0 <= self.kappa <= 255:
            raise ValueError(f"kappa must lie in [0, 255], got {self.kappa}")
        if int(self.erosion_k) != self.erosion_k or self.erosion_k < 1:
            raise ValueError(f"erosion_k must be an integer >= 1, got {self.erosion_k}")


@dataclass(frozen=True, eq=False)
class WaypointSet:
    """Unordered skeleton waypoints with the pixel each one came from."""

    points: np.ndarray  # (O, 2) world coordinates, meters
    pixels: np.ndarray  # (O, 2) integer (row, col)
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    axis_order: str = "row_col"

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------- stages

def fold_unknown(grid: OccupancyGrid) -> OccupancyGrid:
    """Every cell below 255 becomes occupied."""
    cells = np.where(grid.cells < FREE, OCCUPIED, FREE).astype(np.uint8)
    return grid.with_cells(cells)


def gaussian_kernel(sigma: int) -> np.ndarray:
    radius = 3 * int(sigma)
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(grid: OccupancyGrid, sigma: int) -> OccupancyGrid:
    """Separable Gaussian blur, kernel truncated at 3 sigma, edges replicated."""
    kernel = gaussian_kernel(sigma)
    img = grid.cells.astype(float)
    img = ndimage.correlate1d(img, kernel, axis=0, mode="nearest")
    img = ndimage.correlate1d(img, kernel, axis=1, mode="nearest")
    return grid.with_cells(np.clip(np.rint(img), 0, 255).astype(np.uint8))


def binarize(grid: OccupancyGrid, kappa: int) -> OccupancyGrid:
    """Cells strictly above ``kappa`` become free, the rest occupied."""
    cells = np.where(grid.cells > kappa, FREE, OCCUPIED).astype(np.uint8)
    return grid.with_cells(cells)


def largest_filled_region(free: np.ndarray) -> np.ndarray:
    """Filled outline of the 8-connected free component enclosing the most area.

    Holes inside the winning component are filled, so obstacles enclosed by
    free space disappear. Ties go to the component found first in raster order.
    """
    labels, n = ndimage.label(free, structure=_EIGHT)
    if n == 0:
        return np.zeros_like(free, dtype=bool)
    best_area, best = -1, None
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        filled = ndimage.binary_fill_holes(labels[sl] == lab)
        area = int(filled.sum())
        if area > best_area:
            best_area, best = area, (sl, filled)
    out = np.zeros_like(free, dtype=bool)
    sl, filled = best
    out[sl] |= filled
    return out


def fill_largest_contour(grid: OccupancyGrid) -> OccupancyGrid:
    free = grid.cells == FREE
    if not free.any():
        raise EmptyMapError("no free cell in map", stage="contour")
    region = largest_filled_region(free)
    return grid.with_cells(np.where(region, FREE, OCCUPIED).astype(np.uint8))


def erode_mask(free: np.ndarray, k: int) -> np.ndarray:
    """k x k all-ones erosion, anchor at k // 2, outside the map is occupied."""
    if k == 1:
        return free.copy()
    h = k // 2
    occ = np.pad(~free, ((h, k - 1 - h), (h, k - 1 - h)), constant_values=True).astype(np.int32)
    s = np.zeros((occ.shape[0] + 1, occ.shape[1] + 1), dtype=np.int32)
    np.cumsum(np.cumsum(occ, axis=0), axis=1, out=s[1:, 1:])
    rows, cols = free.shape
    window = s[k:k + rows, k:k + cols] - s[:rows, k:k + cols] - s[k:k + rows, :cols] + s[:rows, :cols]
    return window == 0


def erode(grid: OccupancyGrid, erosion_k: int) -> OccupancyGrid:
    free = erode_mask(grid.cells == FREE, int(erosion_k))
    return grid.with_cells(np.where(free, FREE, OCCUPIED).astype(np.uint8))


# Zhang-Suen thinning. Neighbours P2..P9 run clockwise from north; the
# 8-bit neighbourhood code has P2 as bit 0 and P9 as bit 7.
def _zhang_suen_tables() -> tuple[np.ndarray, np.ndarray]:
    first = np.zeros(256, dtype=bool)
    second = np.zeros(256, dtype=bool)
    for code in range(256):
        p = [(code >> b) & 1 for b in range(8)]  # p[0]=P2 ... p[7]=P9
        b = sum(p)
        a = sum(1 for t in range(8) if p[t] == 0 and p[(t + 1) % 8] == 1)
        if not (2 <= b <= 6 and a == 1):
            continue
        p2, p4, p6, p8 = p[0], p[2], p[4], p[6]
        first[code] = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
        second[code] = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
    return first, second


_ZS_TABLES = _zhang_suen_tables()


def zhang_suen(mask: np.ndarray) -> np.ndarray:
    """Zhang-Suen thinning of a boolean mask.

    Produces the same result as the textbook two-subiteration loop but only
    re-examines pixels whose neighbourhood changed since they were last
    tested in the same subiteration.
    """
    rows, cols = mask.shape
    stride = cols + 2
    img = np.zeros((rows + 2) * stride, dtype=np.uint8)
    img.reshape(rows + 2, stride)[1:-1, 1:-1] = mask
    offsets = np.array(
        [-stride, -stride + 1, 1, stride + 1, stride, stride - 1, -1, -stride - 1], dtype=np.intp
    )
    weights = (1 << np.arange(8)).astype(np.uint8)
    dirty = [img.astype(bool), img.astype(bool)]
    sub = 0
    while True:
        cand = np.flatnonzero(dirty[sub])
        if cand.size == 0 and not dirty[1 - sub].any():
            break
        if cand.size:
            dirty[sub][cand] = False
            code = (img[cand[:, None] + offsets] * weights).sum(axis=1)
            kill = cand[_ZS_TABLES[sub][code]]
            if kill.size:
                img[kill] = 0
                dirty[1 - sub][kill] = False
                nb = (kill[:, None] + offsets).ravel()
                nb = nb[img[nb] == 1]
                dirty[0][nb] = True
                dirty[1][nb] = True
        sub ^= 1
    return img.reshape(rows + 2, stride)[1:-1, 1:-1].astype(bool)


def skeleton_mask(free: np.ndarray) -> np.ndarray:
    """Zhang-Suen skeleton with two repairs.

    Fully-set 2x2 blocks left at junctions lose one simple pixel where one
    exists. Components that plain Zhang-Suen erases outright (2x2 squares,
    two-pixel diagonals) keep the pixel closest to their centroid.
    """
    skel = zhang_suen(free)
    _break_square_blocks(skel)
    labels, n = ndimage.label(free, structure=_EIGHT)
    if n == 0:
        return skel
    kept = np.zeros(n + 1, dtype=bool)
    kept[labels[skel]] = True
    lost = np.flatnonzero(~kept[1:]) + 1
    for lab in lost:
        rr, cc = np.nonzero(labels == lab)
        d = (rr - rr.mean()) ** 2 + (cc - cc.mean()) ** 2
        i = int(np.argmin(d))
        skel[rr[i], cc[i]] = True
    return skel


def _is_simple(skel: np.ndarray, i: int, j: int) -> bool:
    """True if deleting (i, j) keeps 8-connectivity of its neighbourhood."""
    rows, cols = skel.shape
    ring = []
    for di, dj in ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)):
        a, b = i + di, j + dj
        ring.append(bool(0 <= a < rows and 0 <= b < cols and skel[a, b]))
    if all(ring[k] for k in (0, 2, 4, 6)) or sum(ring) < 2:
        return False
    # 8-components among ring pixels; diagonal ring pixels touch only their
    # orthogonal ring neighbours, orthogonal ones touch everything adjacent.
    seen = [False] * 8
    comps = 0
    for start in range(8):
        if not ring[start] or seen[start]:
            continue
        comps += 1
        stack = [start]
        seen[start] = True
        while stack:
            k = stack.pop()
            nbrs = [(k - 1) % 8, (k + 1) % 8]
            if k % 2 == 0:
                nbrs += [(k - 2) % 8, (k + 2) % 8]
            for m in nbrs:
                if ring[m] and not seen[m] and (k % 2 == 0 or m % 2 == 0):
                    seen[m] = True
                    stack.append(m)
    return comps == 1


def _break_square_blocks(skel: np.ndarray) -> None:
    """Delete one simple pixel from each fully-set 2x2 block, in place."""
    while True:
        blocks = skel[:-1, :-1] & skel[1:, :-1] & skel[:-1, 1:] & skel[1:, 1:]
        changed = False
        for i, j in np.argwhere(blocks):
            if not (skel[i, j] and skel[i + 1, j] and skel[i, j + 1] and skel[i + 1, j + 1]):
                continue
            for a, b in ((i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)):
                if _is_simple(skel, a, b):
                    skel[a, b] = False
                    changed = True
                    break
        if not changed:
            return


def skeletonize(grid: OccupancyGrid) -> OccupancyGrid:
    skel = skeleton_mask(grid.cells == FREE)
    return grid.with_cells(np.where(skel, FREE, OCCUPIED).astype(np.uint8))


def extract_waypoints(
    grid: OccupancyGrid, metadata: MapMetadata | None = None, axis_order: str = "row_col"
) -> WaypointSet:
    """One world point per skeleton pixel, in raster order."""
    meta = metadata or grid.metadata
    rows, cols = np.nonzero(grid.cells == FREE)
    pixels = np.stack([rows, cols], axis=1).astype(np.int64)
    ref = OccupancyGrid(grid.cells, meta.resolution, meta.origin)
    points = ref.pixel_to_world(rows, cols, axis_order).reshape(-1, 2)
    return WaypointSet(points, pixels, meta.resolution, meta.origin, axis_order)


# ---------------------------------------------------------------- pipeline

def run_stages(grid: OccupancyGrid, params: ReaderParams = ReaderParams()) -> dict[str, OccupancyGrid]:
    """Run every stage and return them keyed by stage name, in order."""
    stages = {"original": grid}
    g = fold_unknown(grid)
    stages["adjusted"] = g
    g = gaussian_smooth(g, params.sigma)
    stages["fuzzied"] = g
    g = binarize(g, params.kappa)
    if not (g.cells == FREE).any():
        raise EmptyMapError("no free cell left after smoothing and thresholding", stage="contour")
    g = fill_largest_contour(g)
    stages["contour"] = g
    g = erode(g, params.erosion_k)
    if not (g.cells == FREE).any():
        raise EmptyMapError(
            f"free space vanished under {params.erosion_k}x{params.erosion_k} erosion", stage="eroded"
        )
    stages["eroded"] = g
    stages["skeleton"] = skeletonize(g)
    return stages


def dump_stages(stages: dict[str, OccupancyGrid], out_dir: str | os.PathLike) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return [save_stage(stages[name], name, out_dir) for name in STAGE_NAMES if name in stages]


def read_map(
    grid: OccupancyGrid,
    params: ReaderParams = ReaderParams(),
    metadata: MapMetadata | None = None,
    stages_out: str | os.PathLike | None = None,
    axis_order: str = "row_col",
) -> WaypointSet:
    stages = run_stages(grid, params)
    if stages_out is not None:
        dump_stages(stages, stages_out)
    return extract_waypoints(stages["skeleton"], metadata, axis_order)


# ---------------------------------------------------------------- waypoint files

def write_waypoints(path: str | os.PathLike, wps: WaypointSet) -> Path:
    path = Path(path)
    lines = [
        f"# waypoints {len(wps)} resolution {wps.resolution!r} "
        f"origin {wps.origin[0]!r} {wps.origin[1]!r} axis {wps.axis_order}"
    ]
    lines += [f"{x!r} {y!r}" for x, y in wps.points.tolist()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_waypoints(path: str | os.PathLike) -> WaypointSet:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# waypoints"):
        raise MapError(f"{path}: missing waypoint header")
    head = text[0].split()
    fields = dict(zip(head[1::2], head[2::2]))
    try:
        count = int(head[2])
        res = float(fields["resolution"])
        i = head.index("origin")
        origin = (float(head[i + 1]), float(head[i + 2]))
        axis = head[head.index("axis") + 1]
    except (KeyError, ValueError, IndexError) as exc:
        raise MapError(f"{path}: malformed waypoint header") from exc
    rows = [ln.split() for ln in text[1:] if ln.strip() and not ln.startswith("#")]
    points = np.array([[float(a), float(b)] for a, b in rows], dtype=float).reshape(-1, 2)
    if len(points) != count:
        raise MapError(f"{path}: header says {count} waypoints, found {len(points)}")
    a = np.rint((points[:, 0] - origin[0]) / res).astype(np.int64)
    b = np.rint((points[:, 1] - origin[1]) / res).astype(np.int64)
    pixels = np.stack([a, b] if axis == "row_col" else [b, a], axis=1).reshape(-1, 2)
    return WaypointSet(points, pixels, res, origin, axis)

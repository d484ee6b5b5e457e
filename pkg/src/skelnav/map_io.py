"""Occupancy map container plus PGM (P5) / key-value sidecar I/O.

Cell encoding on load is tri-level: 0 occupied, 128 unknown, 255 free.
Storage is row-major with row 0 at the top of the image.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

OCCUPIED = 0
UNKNOWN = 128
FREE = 255
TRI_LEVEL = (OCCUPIED, UNKNOWN, FREE)


class MapError(ValueError):
    """Base class for map loading problems."""


class MapFormatError(MapError):
    pass


class MapValidationError(MapError):
    def __init__(self, message: str, index: tuple[int, int] | None = None):
        super().__init__(message)
        self.index = index


class MetadataSchemaError(MapError):
    pass


@dataclass(frozen=True)
class MapMetadata:
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    name: str = ""

    def __post_init__(self):
        if not self.resolution > 0:
            raise MetadataSchemaError(f"resolution must be > 0, got {self.resolution}")


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """8-bit map with metric resolution (m/pixel) and world origin (m)."""

    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    name: str = ""
    _check: bool = field(default=True, repr=False)

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise MapValidationError(f"cells must be a non-empty 2D array, got shape {cells.shape}")
        if cells.dtype != np.uint8:
            if cells.min() < 0 or cells.max() > 255:
                raise MapValidationError("cell values must fit in 8 bits")
            cells = cells.astype(np.uint8)
        cells = np.ascontiguousarray(cells)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        if not self.resolution > 0:
            raise MetadataSchemaError(f"resolution must be > 0, got {self.resolution}")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def metadata(self) -> MapMetadata:
        return MapMetadata(self.resolution, self.origin, self.name)

    def with_cells(self, cells: np.ndarray) -> OccupancyGrid:
        return replace(self, cells=cells)

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.cells.shape == other.cells.shape
            and bool(np.array_equal(self.cells, other.cells))
            and self.resolution == other.resolution
            and self.origin == other.origin
        )

    def pixel_to_world(self, rows, cols, axis_order: str = "row_col") -> np.ndarray:
        """Map pixel indices to world points: ``R * (i, j) + o``.

        ``axis_order="col_row"`` swaps to ``R * (j, i) + o`` for maps authored
        with x along columns.
        """
        rows = np.asarray(rows, dtype=float)
        cols = np.asarray(cols, dtype=float)
        a, b = _ordered(rows, cols, axis_order)
        return np.stack([self.resolution * a + self.origin[0],
                         self.resolution * b + self.origin[1]], axis=-1)

    def world_to_pixel(self, points, axis_order: str = "row_col") -> np.ndarray:
        """Inverse of :meth:`pixel_to_world`; returns fractional (row, col)."""
        pts = np.asarray(points, dtype=float)
        a = (pts[..., 0] - self.origin[0]) / self.resolution
        b = (pts[..., 1] - self.origin[1]) / self.resolution
        rows, cols = _ordered(a, b, axis_order)
        return np.stack([rows, cols], axis=-1)

    def world_bounds(self, axis_order: str = "row_col") -> tuple[tuple[float, float], tuple[float, float]]:
        corners = self.pixel_to_world([0, self.height - 1], [0, self.width - 1], axis_order)
        (x0, y0), (x1, y1) = corners
        return (min(x0, x1), max(x0, x1)), (min(y0, y1), max(y0, y1))


def _ordered(a, b, axis_order):
    if axis_order == "row_col":
        return a, b
    if axis_order == "col_row":
        return b, a
    raise ValueError(f"unknown axis order {axis_order!r}")


def validate_tri_level(cells: np.ndarray) -> None:
    bad = ~np.isin(cells, TRI_LEVEL)
    if bad.any():
        flat = int(np.flatnonzero(bad)[0])
        row, col = divmod(flat, cells.shape[1])
        raise MapValidationError(
            f"cell ({row}, {col}) has value {int(cells[row, col])}, expected one of {TRI_LEVEL}",
            index=(row, col),
        )


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Parse a binary PGM (P5, maxval 255) into a (H, W) uint8 array."""
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise MapFormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic, w, h, maxval = tokens
    if magic != b"P5":
        raise MapFormatError(f"{path}: expected P5 magic, got {magic!r}")
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise MapFormatError(f"{path}: non-integer header field") from exc
    if width < 1 or height < 1:
        raise MapFormatError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise MapFormatError(f"{path}: maxval must be 255, got {maxval}")
    # exactly one whitespace byte separates header and raster
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\n", b"\r", b"\t"):
        raise MapFormatError(f"{path}: missing whitespace after header")
    payload = data[pos + 1:]
    if len(payload) != width * height:
        raise MapFormatError(
            f"{path}: header declares {width}x{height}={width * height} bytes, payload has {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path: str | os.PathLike, cells: np.ndarray) -> Path:
    cells = np.asarray(cells, dtype=np.uint8)
    path = Path(path)
    header = f"P5\n{cells.shape[1]} {cells.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + cells.tobytes(order="C"))
    return path


def read_metadata(path: str | os.PathLike) -> MapMetadata:
    """Read a ``key = value`` sidecar with resolution, origin_x, origin_y."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MetadataSchemaError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    missing = [k for k in ("resolution", "origin_x", "origin_y") if k not in values]
    if missing:
        raise MetadataSchemaError(f"{path}: missing field(s) {', '.join(missing)}")
    try:
        res = float(values["resolution"])
        origin = (float(values["origin_x"]), float(values["origin_y"]))
    except ValueError as exc:
        raise MetadataSchemaError(f"{path}: {exc}") from exc
    return MapMetadata(res, origin, values.get("name", ""))


def write_metadata(path: str | os.PathLike, meta: MapMetadata) -> Path:
    path = Path(path)
    lines = [
        f"resolution = {meta.resolution!r}",
        f"origin_x = {meta.origin[0]!r}",
        f"origin_y = {meta.origin[1]!r}",
    ]
    if meta.name:
        lines.append(f"name = {meta.name}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_map(image_path, metadata_path, strict: bool = True) -> OccupancyGrid:
    """Load a map. With ``strict`` every cell must be 0, 128 or 255."""
    cells = read_pgm(image_path)
    meta = read_metadata(metadata_path)
    if strict:
        validate_tri_level(cells)
    return OccupancyGrid(cells, meta.resolution, meta.origin, meta.name)


def sidecar_path(pgm_path: str | os.PathLike) -> Path:
    return Path(pgm_path).with_suffix(".meta")


def save_map(grid: OccupancyGrid, image_path) -> tuple[Path, Path]:
    image_path = Path(image_path)
    write_pgm(image_path, grid.cells)
    meta = write_metadata(sidecar_path(image_path), grid.metadata)
    return image_path, meta


def save_stage(grid: OccupancyGrid, stage_name: str, out_dir) -> Path:
    """Write ``<out_dir>/<stage_name>.pgm`` and its ``.meta`` sidecar."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise OSError(f"output directory does not exist: {out_dir}")
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory is not writable: {out_dir}")
    path, _ = save_map(grid, out_dir / f"{stage_name}.pgm")
    return path

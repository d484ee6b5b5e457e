import numpy as np
import pytest

from skelnav.map_io import (FREE, OCCUPIED, UNKNOWN, MapFormatError, MapMetadata, MapValidationError,
                            MetadataSchemaError, OccupancyGrid, load_map, read_metadata, read_pgm,
                            save_map, save_stage, sidecar_path, validate_tri_level, write_metadata,
                            write_pgm)


def _cells(rng, h=7, w=5):
    return rng.choice(np.array([OCCUPIED, UNKNOWN, FREE], np.uint8), size=(h, w))


def test_pgm_round_trip(tmp_path, rng):
    cells = _cells(rng)
    write_pgm(tmp_path / "a.pgm", cells)
    back = read_pgm(tmp_path / "a.pgm")
    assert back.shape == (7, 5)
    assert np.array_equal(back, cells)


def test_pgm_header_comments(tmp_path):
    payload = bytes([0, 128, 255, 255, 0, 128])
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n3 2\n# another\n255\n" + payload)
    cells = read_pgm(tmp_path / "c.pgm")
    assert cells.tolist() == [[0, 128, 255], [255, 0, 128]]


@pytest.mark.parametrize("blob", [
    b"P2\n2 2\n255\n" + bytes(4),  # ascii magic
    b"P5\n2 2\n65535\n" + bytes(8),  # 16-bit
    b"P5\n2 2\n255\n" + bytes(3),  # short payload
    b"P5\n2 2\n255\n" + bytes(5),  # long payload
    b"P5\n2",  # truncated header
    b"P5\n0 2\n255\n",
])
def test_pgm_rejects_malformed(tmp_path, blob):
    (tmp_path / "bad.pgm").write_bytes(blob)
    with pytest.raises(MapFormatError):
        read_pgm(tmp_path / "bad.pgm")


def test_row_zero_is_first_payload_row(tmp_path):
    cells = np.full((3, 4), FREE, np.uint8)
    cells[0, 1] = OCCUPIED
    write_pgm(tmp_path / "r.pgm", cells)
    raw = (tmp_path / "r.pgm").read_bytes()
    assert raw[-12:][1] == OCCUPIED


def test_tri_level_validation_reports_first_bad_cell():
    cells = np.full((4, 4), FREE, np.uint8)
    cells[2, 3] = 17
    cells[3, 0] = 200
    with pytest.raises(MapValidationError) as exc:
        validate_tri_level(cells)
    assert exc.value.index == (2, 3)


def test_load_map_strict_and_lenient(tmp_path):
    cells = np.full((4, 4), FREE, np.uint8)
    cells[1, 1] = 42
    write_pgm(tmp_path / "m.pgm", cells)
    write_metadata(tmp_path / "m.meta", MapMetadata(0.05, (1.0, -2.0), "x"))
    with pytest.raises(MapValidationError):
        load_map(tmp_path / "m.pgm", tmp_path / "m.meta")
    grid = load_map(tmp_path / "m.pgm", tmp_path / "m.meta", strict=False)
    assert grid.resolution == 0.05 and grid.origin == (1.0, -2.0) and grid.name == "x"


def test_metadata_parsing(tmp_path):
    p = tmp_path / "m.meta"
    p.write_text("# comment\nresolution = 0.1\norigin_x=-3.5  # trailing\norigin_y = 2\n")
    meta = read_metadata(p)
    assert meta == MapMetadata(0.1, (-3.5, 2.0), "")
    p.write_text("resolution = 0.1\norigin_x = 0\n")
    with pytest.raises(MetadataSchemaError, match="origin_y"):
        read_metadata(p)
    p.write_text("resolution = -1\norigin_x = 0\norigin_y = 0\n")
    with pytest.raises(MetadataSchemaError):
        read_metadata(p)
    p.write_text("resolution 0.1\n")
    with pytest.raises(MetadataSchemaError):
        read_metadata(p)


def test_save_map_round_trip(tmp_path, rng):
    grid = OccupancyGrid(_cells(rng, 9, 11), 0.1, (0.5, 0.25), "t")
    img, meta = save_map(grid, tmp_path / "g.pgm")
    assert meta == sidecar_path(img)
    assert load_map(img, meta) == grid


def test_grid_is_read_only(rng):
    grid = OccupancyGrid(_cells(rng), 0.1)
    with pytest.raises(ValueError):
        grid.cells[0, 0] = 1


def test_grid_rejects_bad_shapes():
    with pytest.raises(MapValidationError):
        OccupancyGrid(np.zeros((0, 3), np.uint8), 0.1)
    with pytest.raises(MapValidationError):
        OccupancyGrid(np.zeros(5, np.uint8), 0.1)
    with pytest.raises(MetadataSchemaError):
        OccupancyGrid(np.zeros((2, 2), np.uint8), 0.0)


def test_pixel_world_transforms():
    grid = OccupancyGrid(np.zeros((10, 20), np.uint8), 0.1, (1.0, 2.0))
    xy = grid.pixel_to_world([3], [7])
    assert np.allclose(xy, [[1.3, 2.7]])
    xy2 = grid.pixel_to_world([3], [7], "col_row")
    assert np.allclose(xy2, [[1.7, 2.3]])
    assert np.allclose(grid.world_to_pixel(xy), [[3, 7]])
    assert np.allclose(grid.world_to_pixel(xy2, "col_row"), [[3, 7]])
    with pytest.raises(ValueError):
        grid.pixel_to_world([0], [0], "xy")


def test_save_stage_needs_existing_dir(tmp_path):
    grid = OccupancyGrid(np.zeros((3, 3), np.uint8), 0.1)
    with pytest.raises(OSError):
        save_stage(grid, "original", tmp_path / "missing")
    path = save_stage(grid, "original", tmp_path)
    assert path.name == "original.pgm" and path.with_suffix(".meta").exists()

import numpy as np
import pytest

from mlsom.errors import ConfigError
from mlsom.patching import PatchConfig
from mlsom.som import NeuronGrid, SomConfig, init_grid
from mlsom.viz import (
    ACTIVE,
    dump_feature_map,
    grid_sheet,
    read_pnm,
    render_feature_overlay,
    render_grid,
    sheet_shape,
)


def test_constant_tiles_are_mid_gray(tmp_path):
    g = NeuronGrid(2, 2, np.repeat(np.array([[0.0], [1.0], [-3.0], [7.0]]), 9, axis=1))
    path = render_grid(g, PatchConfig(3, 3), tmp_path / "g.pgm")
    img = read_pnm(path)
    assert img.shape == (7, 7)
    for r in (0, 4):
        for c in (0, 4):
            assert (img[r:r + 3, c:c + 3] == 128).all()
    assert (img[3] == 255).all() and (img[:, 3] == 255).all()


def test_ramp_tile():
    g = NeuronGrid(1, 1, np.linspace(-1, 1, 16)[None])
    sheet = grid_sheet(g, PatchConfig(4, 4))
    assert sheet[0, 0] == 0 and sheet[-1, -1] == 255
    assert (np.diff(sheet.reshape(-1).astype(int)) > 0).all()


@pytest.mark.parametrize("h,w,win,channels", [(44, 44, 14, 1), (3, 5, 4, 3), (1, 1, 28, 1)])
def test_sheet_dimensions(h, w, win, channels):
    g = init_grid(SomConfig(h, w, n_winners=1), win * win * channels)
    before = g.checksum()
    sheet = grid_sheet(g, PatchConfig(win, win, channels))
    assert sheet.shape[:2] == sheet_shape(h, w, win) == (h * win + h - 1, w * win + w - 1)
    assert sheet.ndim == (3 if channels == 3 else 2)
    assert g.checksum() == before


def test_dim_mismatch():
    g = init_grid(SomConfig(2, 2, n_winners=1), 10)
    with pytest.raises(ConfigError):
        grid_sheet(g, PatchConfig(3, 3))


def _active_cells(panel, fmap, cell):
    gh, gw = fmap.shape
    lattice = panel[:gh * cell, -gw * cell:]
    centres = lattice[cell // 2::cell, cell // 2::cell]
    return (centres == ACTIVE).all(axis=-1)


def test_overlay_highlights(tmp_path, rng):
    image = rng.integers(0, 256, (28, 28, 1), dtype=np.uint8)
    empty = np.zeros((16, 16), np.uint8)
    panel = read_pnm(render_feature_overlay(image, empty, tmp_path / "a.ppm", cell=8))
    assert not _active_cells(panel, empty, 8).any()
    one = empty.copy()
    one[3, 11] = 1
    panel = read_pnm(render_feature_overlay(image, one, tmp_path / "b.ppm", cell=8))
    np.testing.assert_array_equal(_active_cells(panel, one, 8), one.astype(bool))


def test_feature_map_pgm(tmp_path):
    fmap = np.array([[0, 1], [1, 0]], np.uint8)
    img = read_pnm(dump_feature_map(fmap, tmp_path / "f.pgm"))
    assert img.tolist() == [[0, 255], [255, 0]]
    assert (tmp_path / "f.pgm").read_bytes().startswith(b"P5\n2 2\n255\n")


def test_png_output(tmp_path):
    pytest.importorskip("PIL")
    from PIL import Image

    g = init_grid(SomConfig(2, 3, n_winners=1), 16)
    render_grid(g, PatchConfig(4, 4), tmp_path / "g.png")
    assert Image.open(tmp_path / "g.png").size == (14, 9)

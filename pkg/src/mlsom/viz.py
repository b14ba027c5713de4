"""Neuron tile sheets and feature-map overlays written as PGM/PPM (or PNG)."""

from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, ParseError

SEPARATOR = 255
BACKGROUND = (68, 1, 84)
ACTIVE = (253, 231, 37)


def write_pnm(path, image):
    """Write a uint8 (H, W) array as binary PGM or (H, W, 3) as binary PPM.

    A ``.png`` suffix goes through Pillow instead.
    """
    image = np.ascontiguousarray(image, dtype=np.uint8)
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(image).save(path)
        return path
    if image.ndim == 2:
        tag = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        tag = b"P6"
    else:
        raise DimensionError(f"cannot write image of shape {image.shape} as PNM")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(tag + b"\n%d %d\n255\n" % (w, h))
        f.write(image.tobytes())
    return path


def read_pnm(path):
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] not in (b"P5", b"P6") or parts[3] != b"255":
        raise ParseError(f"{path} is not an 8-bit binary PGM/PPM", field="header")
    w, h = int(parts[1]), int(parts[2])
    channels = 3 if parts[0] == b"P6" else 1
    # exactly one whitespace byte follows the maxval
    body = data[len(data) - w * h * channels:]
    img = np.frombuffer(body, dtype=np.uint8)
    return img.reshape(h, w, 3) if channels == 3 else img.reshape(h, w)


def normalize_tile(tile):
    """Min-max scale to 0..255; a constant tile becomes mid-gray 128."""
    tile = np.asarray(tile, dtype=np.float64)
    lo, hi = tile.min(), tile.max()
    if hi == lo:
        return np.full(tile.shape, 128, dtype=np.uint8)
    return np.rint((tile - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def sheet_shape(height, width, window, separator=1):
    return height * window + (height - 1) * separator, width * window + (width - 1) * separator


def grid_sheet(grid, patch_cfg, separator=1):
    """Tile every neuron's weights as a window x window image, lattice-ordered."""
    if grid.dim != patch_cfg.patch_dim:
        raise ConfigError(
            f"grid dim {grid.dim} does not match window {patch_cfg.window} x "
            f"{patch_cfg.channels} channels"
        )
    w, c = patch_cfg.window, patch_cfg.channels
    rows, cols = sheet_shape(grid.height, grid.width, w, separator)
    sheet = np.full((rows, cols, c), SEPARATOR, dtype=np.uint8)
    step = w + separator
    for j in range(grid.size):
        r, col = divmod(j, grid.width)
        tile = normalize_tile(grid.weights[j]).reshape(w, w, c)
        sheet[r * step:r * step + w, col * step:col * step + w] = tile
    return sheet[..., 0] if c == 1 else sheet


def render_grid(grid, patch_cfg, out_path, separator=1):
    return write_pnm(out_path, grid_sheet(grid, patch_cfg, separator))


def overlay_panel(image, feature_map, cell=None, gap=4):
    """Input image (upscaled) beside the lattice with active cells highlighted."""
    fmap = np.asarray(feature_map)
    if fmap.ndim != 2:
        raise DimensionError(f"feature map must be 2-D, got shape {fmap.shape}")
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.rint(np.clip(img, 0, 1) * 255).astype(np.uint8)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    gh, gw = fmap.shape
    cell = cell or max(1, 8 if gh <= 64 else 4)
    lattice = np.empty((gh, gw, 3), dtype=np.uint8)
    lattice[:] = BACKGROUND
    lattice[fmap != 0] = ACTIVE
    lattice = lattice.repeat(cell, axis=0).repeat(cell, axis=1)
    scale = max(1, lattice.shape[0] // img.shape[0])
    big = img.repeat(scale, axis=0).repeat(scale, axis=1)
    height = max(big.shape[0], lattice.shape[0])
    panel = np.zeros((height, big.shape[1] + gap + lattice.shape[1], 3), dtype=np.uint8)
    panel[:big.shape[0], :big.shape[1]] = big
    panel[:lattice.shape[0], big.shape[1] + gap:] = lattice
    return panel


def render_feature_overlay(image, feature_map, out_path, cell=None):
    return write_pnm(out_path, overlay_panel(image, feature_map, cell))


def dump_feature_map(feature_map, out_path):
    """PGM with one pixel per lattice cell: 0 -> black, 1 -> white."""
    fmap = np.asarray(feature_map)
    return write_pnm(out_path, np.where(fmap != 0, 255, 0).astype(np.uint8))

"""Multi-code binary feature maps built from a frozen lattice."""

import numpy as np

from . import _kernels
from .errors import ConfigError, DimensionError
from .patching import extract_patches_batch, normalize_image
from .som import compute_distances, find_winners


def binarize(x):
    """Nonzero entries become 1 (uint8)."""
    return (np.asarray(x) != 0).astype(np.uint8)


def _check_k(k, grid):
    if not isinstance(k, (int, np.integer)) or k <= 0 or k > grid.size:
        raise ConfigError(f"k={k!r} must lie in [1, {grid.size}]")


def encode_patch(patch, grid, k):
    """Binary (height, width) grid with ones at the k nearest neurons."""
    _check_k(k, grid)
    winners = find_winners(compute_distances(patch, grid), k, grid.width)
    bits = np.zeros(grid.size, dtype=np.uint8)
    bits[winners.indices] = 1
    return bits.reshape(grid.height, grid.width)


def encode_image(image, grid, patch_cfg, k):
    """Union of the per-patch top-k codes of one image, as a (height, width) map.

    uint8 images are scaled to [0, 1] first; float images are used as given.
    """
    return encode_images(np.asarray(image)[None], grid, patch_cfg, k)[0]


def encode_images(images, grid, patch_cfg, k, chunk=512, flat=False):
    """Encode a stack of images; returns uint8 maps of shape (N, height, width).

    With ``flat=True`` the result is (N, height * width), the classifier's input layout.
    """
    _check_k(k, grid)
    images = np.asarray(images)
    out = np.zeros((len(images), grid.size), dtype=np.uint8)
    for start in range(0, len(images), chunk):
        patches = extract_patches_batch(images[start:start + chunk], patch_cfg)
        if patches.shape[-1] != grid.dim:
            raise DimensionError(
                f"patch dim {patches.shape[-1]} does not match grid dim {grid.dim}"
            )
        if patches.dtype == np.uint8:
            patches = normalize_image(patches, dtype=grid.weights.dtype)
        patches = np.ascontiguousarray(patches, dtype=grid.weights.dtype)
        _kernels.encode_batch(grid.weights, patches, k, out[start:start + chunk])
    if flat:
        return out
    return out.reshape(len(images), grid.height, grid.width)

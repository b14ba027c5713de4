"""Local receptive fields: sliding-window patch extraction."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError


@dataclass(frozen=True)
class PatchConfig:
    """Sliding window of size (window, window) moved with the given stride.

    A window equal to the image side with stride equal to the image side gives
    the global receptive field: one patch holding the whole image.
    """

    window: int
    stride: int
    channels: int = 1

    def __post_init__(self):
        for name in ("window", "stride", "channels"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")

    @property
    def patch_dim(self):
        return self.window * self.window * self.channels

    def positions_per_axis(self, size):
        self.check_axis(size)
        return (size - self.window) // self.stride + 1

    def check_axis(self, size):
        if self.window > size:
            raise ConfigError(f"window {self.window} exceeds image size {size}")
        if (size - self.window) % self.stride:
            raise ConfigError(
                f"stride incompatibility: ({size} - {self.window}) is not divisible "
                f"by stride {self.stride}"
            )

    def patch_count(self, height, width):
        return self.positions_per_axis(height) * self.positions_per_axis(width)


@dataclass
class PatchSet:
    """Flattened patches of one image with the (row, col) origin of each window."""

    patches: np.ndarray
    grid_positions: list

    def __len__(self):
        return len(self.patches)


def normalize_image(raw, dtype=np.float64):
    """Map byte pixels to [0, 1] by dividing by 255."""
    return (np.asarray(raw, dtype=np.float64) / 255.0).astype(dtype, copy=False)


def _as_hwc(image):
    image = np.asarray(image)
    if image.ndim == 2:
        return image[:, :, None]
    if image.ndim != 3:
        raise ConfigError(f"expected an (H, W) or (H, W, C) image, got shape {image.shape}")
    return image


def extract_patches(image, cfg):
    """Cut `image` into row-major windows, each flattened row-major with channels last.

    >>> import numpy as np
    >>> ps = extract_patches(np.zeros((28, 28)), PatchConfig(14, 7))
    >>> ps.patches.shape
    (9, 196)
    """
    hwc = _as_hwc(image)
    patches = extract_patches_batch(hwc[None], cfg)[0]
    rows = range(0, hwc.shape[0] - cfg.window + 1, cfg.stride)
    cols = range(0, hwc.shape[1] - cfg.window + 1, cfg.stride)
    positions = [(r, c) for r in rows for c in cols]
    return PatchSet(patches=patches, grid_positions=positions)


def extract_patches_batch(images, cfg):
    """Vectorised extract_patches over a stack of images.

    Args:
        images: array of shape (B, H, W) or (B, H, W, C).
        cfg: window geometry.

    Returns:
        Contiguous array of shape (B, P, window * window * C).
    """
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[..., None]
    if images.ndim != 4:
        raise ConfigError(f"expected a (B, H, W[, C]) stack, got shape {images.shape}")
    b, h, w, c = images.shape
    if c != cfg.channels:
        raise ConfigError(f"image has {c} channels, patch config expects {cfg.channels}")
    cfg.check_axis(h)
    cfg.check_axis(w)
    win = cfg.window
    views = sliding_window_view(images, (win, win), axis=(1, 2))
    views = views[:, :: cfg.stride, :: cfg.stride]
    # (B, nr, nc, C, win, win) -> (B, nr, nc, win, win, C)
    views = views.transpose(0, 1, 2, 4, 5, 3)
    return np.ascontiguousarray(views).reshape(b, -1, cfg.patch_dim)

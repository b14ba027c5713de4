"""Neuron lattice, winner search and neighbourhood updates (the unsupervised SOM phase)."""

import hashlib
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    BadMagicError,
    ConfigError,
    DataError,
    DimensionError,
    ParseError,
    ScheduleError,
    TrainingError,
    TruncatedFileError,
)
from .patching import extract_patches_batch, normalize_image

logger = logging.getLogger(__name__)

GRID_MAGIC = b"MLSOM1\0"
_GRID_HEADER = struct.Struct("<III")

RULES = ("standard", "literal")


@dataclass(frozen=True)
class SomConfig:
    """Hyper-parameters of the competitive learning phase.

    ``rule="literal"`` switches to a verbatim transcription of the published
    pseudo-code (growing exponential, push away from the winner's weights).
    It diverges quickly and exists only for side-by-side comparison.
    """

    grid_height: int = 44
    grid_width: int = 44
    n_winners: int = 5
    sigma: float = 2.0
    base_lr: float = 0.3
    epochs: int = 20
    seed: int = 0
    shuffle: bool = False
    rule: str = "standard"

    def __post_init__(self):
        for name in ("grid_height", "grid_width", "n_winners"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 0:
            raise ConfigError(f"epochs must be a non-negative integer, got {self.epochs!r}")
        if self.n_winners > self.grid_height * self.grid_width:
            raise ConfigError(
                f"n_winners={self.n_winners} exceeds grid size "
                f"{self.grid_height * self.grid_width}"
            )
        if not (0 < self.base_lr <= 1):
            raise ConfigError(f"base_lr must lie in (0, 1], got {self.base_lr}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}, got {self.rule!r}")

    @property
    def size(self):
        return self.grid_height * self.grid_width


@dataclass
class NeuronGrid:
    """2D lattice of weight vectors stored as a (height * width, dim) matrix.

    Row ``j`` is the neuron at lattice coordinate ``(j // width, j % width)``.
    """

    height: int
    width: int
    weights: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[0] != self.height * self.width:
            raise DimensionError(
                f"weights of shape {self.weights.shape} do not fit a "
                f"{self.height}x{self.width} lattice"
            )

    @property
    def dim(self):
        return self.weights.shape[1]

    @property
    def size(self):
        return self.height * self.width

    def coord(self, index):
        return divmod(int(index), self.width)

    def index(self, row, col):
        return row * self.width + col

    def copy(self):
        return NeuronGrid(self.height, self.width, self.weights.copy())

    def checksum(self):
        return hashlib.sha256(np.ascontiguousarray(self.weights).tobytes()).hexdigest()


@dataclass
class WinnerSet:
    """Winning neurons for one patch, closest first."""

    coords: list
    distances: list
    indices: list = field(default_factory=list)

    def __len__(self):
        return len(self.coords)


def init_grid(config, dim, dtype=np.float32):
    """Draw every weight i.i.d. from N(0, 1) with the configured seed."""
    if not isinstance(dim, (int, np.integer)) or dim <= 0:
        raise ConfigError(f"dim must be a positive integer, got {dim!r}")
    rng = np.random.default_rng(config.seed)
    weights = rng.standard_normal((config.size, dim)).astype(dtype)
    return NeuronGrid(config.grid_height, config.grid_width, weights)


def _check_patch(patch, grid):
    patch = np.asarray(patch)
    if patch.ndim != 1 or patch.shape[0] != grid.dim:
        raise DimensionError(f"patch of shape {patch.shape} does not match grid dim {grid.dim}")
    return patch


def compute_distances(patch, grid):
    """Euclidean distance from `patch` to every neuron, as a float64 vector."""
    patch = _check_patch(patch, grid).astype(grid.weights.dtype, copy=False)
    out = np.empty(grid.size, dtype=np.float64)
    _kernels.distances_into(grid.weights, np.ascontiguousarray(patch), out)
    return out


def find_winners(distances, count, grid_width):
    """Pick the `count` closest neurons; ties go to the lower flattened index."""
    distances = np.ascontiguousarray(distances, dtype=np.float64)
    if count <= 0 or count > distances.shape[0]:
        raise ConfigError(f"cannot select {count} winners from {distances.shape[0]} neurons")
    idx = np.empty(count, dtype=np.int64)
    dsel = np.empty(count, dtype=np.float64)
    _kernels.select_into(distances, count, idx, dsel)
    coords = [divmod(int(j), grid_width) for j in idx]
    return WinnerSet(coords=coords, distances=dsel.tolist(), indices=idx.tolist())


def neighborhood_decay(winner, neuron, sigma, literal=False):
    """Gaussian falloff exp(-d^2 / (2 sigma^2)) in lattice distance d.

    With ``literal=True`` returns the published exp(+d / (2 sigma^2)) instead.
    """
    d2 = (winner[0] - neuron[0]) ** 2 + (winner[1] - neuron[1]) ** 2
    if literal:
        return math.exp(math.sqrt(d2) / (2 * sigma * sigma))
    return math.exp(-d2 / (2 * sigma * sigma))


def decay_map(winner, height, width, sigma, literal=False):
    """neighborhood_decay for every lattice cell, flattened row-major."""
    rows, cols = np.divmod(np.arange(height * width), width)
    d2 = (rows - winner[0]) ** 2 + (cols - winner[1]) ** 2
    if literal:
        return np.exp(np.sqrt(d2) / (2 * sigma * sigma))
    return np.exp(-d2 / (2 * sigma * sigma))


def lr_at_epoch(base_lr, epoch, epochs):
    """Linearly decayed learning rate; `epoch` is zero-based."""
    if epochs <= 0:
        raise ScheduleError(f"epochs must be positive, got {epochs}")
    if epoch < 0 or epoch > epochs:
        raise ScheduleError(f"epoch {epoch} outside [0, {epochs}]")
    return base_lr * (1 - epoch / epochs)


def update_for_winner(grid, patch, winner, lr_epo, sigma, literal=False):
    """Pull every neuron toward `patch`, scaled by its lattice decay from `winner`."""
    patch = _check_patch(patch, grid)
    w = grid.weights
    if literal:
        decay = decay_map(winner, grid.height, grid.width, sigma, literal=True)
        winner_row = w[grid.index(*winner)].copy()
        w += (lr_epo * decay)[:, None].astype(w.dtype) * (w - winner_row)
        return
    if lr_epo == 0:
        return
    step = (lr_epo * decay_map(winner, grid.height, grid.width, sigma))[:, None]
    # w (1 - a) + a p is exact at a = 0 and a = 1
    w[:] = w * (1 - step).astype(w.dtype) + step.astype(w.dtype) * patch.astype(w.dtype, copy=False)


def train_step(grid, patch, config, lr_epo):
    """One competitive step: pick n winners, then update around each in turn."""
    distances = compute_distances(patch, grid)
    winners = find_winners(distances, config.n_winners, grid.width)
    if config.rule == "literal":
        for coord in winners.coords:
            update_for_winner(grid, patch, coord, lr_epo, config.sigma, literal=True)
    elif lr_epo != 0:
        patch = np.ascontiguousarray(patch, dtype=grid.weights.dtype)
        keep = np.empty(grid.size, dtype=grid.weights.dtype)
        step = np.empty(grid.size, dtype=grid.weights.dtype)
        _kernels.apply_winners(
            grid.weights, patch, np.asarray(winners.indices, dtype=np.int64),
            grid.width, float(lr_epo), float(config.sigma), keep, step,
        )
    return winners


def _prepare(images, grid, patch_cfg):
    patches = extract_patches_batch(images, patch_cfg)
    if patches.shape[-1] != grid.dim:
        raise DimensionError(f"patch dim {patches.shape[-1]} does not match grid dim {grid.dim}")
    if patches.dtype == np.uint8:
        patches = normalize_image(patches, dtype=grid.weights.dtype)
    return np.ascontiguousarray(patches, dtype=grid.weights.dtype)


def train_som(grid, images, patch_cfg, config, progress=None, chunk=1024):
    """Run the unsupervised phase in place and return `grid`.

    Args:
        grid: lattice to train; mutated.
        images: (N, H, W[, C]) array. uint8 input is scaled to [0, 1].
        patch_cfg: sliding-window geometry.
        config: SOM hyper-parameters; ``config.epochs`` passes over `images`.
        progress: optional callable ``progress(epoch, images_done, total)``.
        chunk: images whose patches are materialised at once.
    """
    images = np.asarray(images)
    if len(images) == 0:
        raise DataError("cannot train on an empty dataset")
    if config.grid_height != grid.height or config.grid_width != grid.width:
        raise ConfigError("config lattice does not match grid lattice")
    rng = np.random.default_rng(config.seed)
    total = len(images)
    for epoch in range(config.epochs):
        lr = lr_at_epoch(config.base_lr, epoch, config.epochs)
        order = rng.permutation(total) if config.shuffle else None
        for start in range(0, total, chunk):
            sel = slice(start, start + chunk) if order is None else order[start:start + chunk]
            patches = _prepare(images[sel], grid, patch_cfg)
            flat = patches.reshape(-1, grid.dim)
            if config.rule == "literal":
                for p in flat:
                    train_step(grid, p, config, lr)
            else:
                _kernels.train_patches(
                    grid.weights, flat, config.n_winners, grid.width, float(lr), float(config.sigma)
                )
            if progress is not None:
                progress(epoch, min(start + chunk, total), total)
        logger.debug("som epoch %d/%d lr=%.4f", epoch + 1, config.epochs, lr)
        if not np.isfinite(grid.weights).all():
            raise TrainingError(f"non-finite grid weights after epoch {epoch}")
    return grid


def quantization_error(grid, images, patch_cfg, chunk=1024):
    """Mean distance from each patch to its nearest neuron."""
    images = np.asarray(images)
    total, count = 0.0, 0
    for start in range(0, len(images), chunk):
        flat = _prepare(images[start:start + chunk], grid, patch_cfg).reshape(-1, grid.dim)
        out = np.empty(len(flat), dtype=np.float64)
        _kernels.nearest_distances(grid.weights, flat, out)
        total += out.sum()
        count += len(out)
    return total / count


def save_grid(grid, path):
    """Write the binary grid checkpoint (magic, u32 header, float32 weights, little-endian)."""
    with open(path, "wb") as f:
        f.write(grid_to_bytes(grid))


def grid_to_bytes(grid):
    header = GRID_MAGIC + _GRID_HEADER.pack(grid.height, grid.width, grid.dim)
    return header + np.ascontiguousarray(grid.weights, dtype="<f4").tobytes()


def load_grid(path):
    with open(path, "rb") as f:
        return grid_from_bytes(f.read())


def grid_from_bytes(buf):
    if buf[:len(GRID_MAGIC)] != GRID_MAGIC:
        raise BadMagicError("bad magic in grid checkpoint", field="magic")
    off = len(GRID_MAGIC)
    if len(buf) < off + _GRID_HEADER.size:
        raise TruncatedFileError("grid checkpoint header truncated", field="header")
    height, width, dim = _GRID_HEADER.unpack_from(buf, off)
    off += _GRID_HEADER.size
    if height == 0 or width == 0 or dim == 0:
        raise ParseError("grid checkpoint has a zero dimension", field="header")
    expected = height * width * dim * 4
    body = buf[off:]
    if len(body) < expected:
        raise TruncatedFileError(
            f"grid checkpoint weights truncated: {len(body)} of {expected} bytes", field="weights"
        )
    if len(body) > expected:
        raise ParseError("trailing bytes after grid weights", field="weights")
    weights = np.frombuffer(body, dtype="<f4").astype(np.float32).reshape(height * width, dim)
    return NeuronGrid(height, width, weights)

"""MNIST IDX and CIFAR-10 binary readers/writers, plus stratified subsets."""

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    CountMismatchError,
    DataError,
    ParseError,
    TruncatedFileError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 1 + 32 * 32 * 3

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_FILES = {
    "train": [f"data_batch_{i}.bin" for i in range(1, 6)],
    "test": ["test_batch.bin"],
}


@dataclass
class LabeledImageSet:
    """Images as (N, H, W, C) uint8 plus integer labels."""

    images: np.ndarray
    labels: np.ndarray
    num_classes: int = 10

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(
                f"{len(self.images)} images but {len(self.labels)} labels", field="count"
            )
        if len(self.labels) and int(self.labels.max()) >= self.num_classes:
            raise ParseError(f"label {int(self.labels.max())} >= {self.num_classes}", field="label")

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return self.images.shape[1:]

    def take(self, indices):
        return LabeledImageSet(self.images[indices], self.labels[indices], self.num_classes)


def _read(path):
    path = Path(path)
    if not path.exists() and Path(str(path) + ".gz").exists():
        path = Path(str(path) + ".gz")
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as f:
            return f.read()
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc


def parse_idx(buf, magic, ndim):
    """Parse an IDX buffer of unsigned bytes; returns an array of shape (count, *dims)."""
    header = 4 * (1 + ndim)
    if len(buf) < 4:
        raise TruncatedFileError("file shorter than the magic number", field="magic")
    (found,) = struct.unpack_from(">I", buf, 0)
    if found != magic:
        raise BadMagicError(f"bad magic 0x{found:08x}, expected 0x{magic:08x}", field="magic")
    if len(buf) < header:
        raise TruncatedFileError("IDX header truncated", field="dimensions")
    dims = struct.unpack_from(f">{ndim}I", buf, 4)
    body = buf[header:]
    expected = int(np.prod(dims))
    if len(body) < expected:
        raise TruncatedFileError(
            f"header promises {dims[0]} items but the body holds {len(body)} of {expected} bytes",
            field="data",
        )
    if len(body) > expected:
        raise ParseError(f"{len(body) - expected} trailing bytes after IDX data", field="data")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims).copy()


def load_mnist(images_path, labels_path):
    """Read an IDX image/label pair (optionally gzipped) into (N, 28, 28, 1) images."""
    images = parse_idx(_read(images_path), IDX_IMAGES_MAGIC, 3)
    labels = parse_idx(_read(labels_path), IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise CountMismatchError(
            f"image file holds {len(images)} items, label file {len(labels)}", field="count"
        )
    return LabeledImageSet(images[..., None], labels, 10)


def idx_bytes(array, magic):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    return struct.pack(f">I{array.ndim}I", magic, *array.shape) + array.tobytes()


def write_mnist(images_path, labels_path, dataset):
    images = dataset.images
    if images.ndim == 4:
        images = images[..., 0]
    Path(images_path).write_bytes(idx_bytes(images, IDX_IMAGES_MAGIC))
    Path(labels_path).write_bytes(idx_bytes(dataset.labels, IDX_LABELS_MAGIC))


def parse_cifar10(buf):
    if len(buf) % CIFAR_RECORD:
        raise ParseError(
            f"size {len(buf)} is not a multiple of the {CIFAR_RECORD}-byte record", field="record"
        )
    records = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].copy()
    # planes are stored R, G, B, each 32x32 row-major
    images = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).copy()
    return images, labels


def load_cifar10(batch_paths):
    """Concatenate CIFAR-10 binary batches into (N, 32, 32, 3) images."""
    if isinstance(batch_paths, (str, os.PathLike)):
        batch_paths = [batch_paths]
    parts = [parse_cifar10(_read(p)) for p in batch_paths]
    if not parts:
        return LabeledImageSet(np.zeros((0, 32, 32, 3), np.uint8), np.zeros(0, np.uint8), 10)
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    return LabeledImageSet(images, labels, 10)


def cifar10_bytes(dataset):
    planes = np.ascontiguousarray(dataset.images.transpose(0, 3, 1, 2)).reshape(len(dataset), -1)
    records = np.concatenate([dataset.labels.astype(np.uint8)[:, None], planes], axis=1)
    return records.astype(np.uint8).tobytes()


def write_cifar10(path, dataset):
    Path(path).write_bytes(cifar10_bytes(dataset))


def _locate(data_dir, names, subdirs):
    data_dir = Path(data_dir)
    for sub in subdirs:
        base = data_dir / sub if sub else data_dir
        if all((base / n).exists() or (base / (n + ".gz")).exists() for n in names):
            return [base / n for n in names]
    raise DataError(f"could not find {', '.join(names)} under {data_dir}")


def load_dataset(name, data_dir, split):
    """Load the `split` ("train" or "test") of "mnist" or "cifar10" from `data_dir`.

    Files may sit directly in `data_dir` or in the conventional subdirectory
    (``mnist/`` or ``cifar-10-batches-bin/``).
    """
    if split not in ("train", "test"):
        raise ConfigError(f"unknown split {split!r}")
    if name == "mnist":
        paths = _locate(data_dir, MNIST_FILES[split], ["", "mnist", "MNIST/raw"])
        return load_mnist(*paths)
    if name == "cifar10":
        paths = _locate(data_dir, CIFAR_FILES[split], ["", "cifar-10-batches-bin", "cifar10"])
        return load_cifar10(paths)
    raise ConfigError(f"unknown dataset {name!r}")


def subset(dataset, count, seed=0):
    """Seeded, label-stratified sample without replacement, in original order.

    Classes receive equal shares; the remainder, and any share a small class
    cannot fill, is spread over the other classes in a seeded order.
    """
    n = len(dataset)
    if count < 0 or count > n:
        raise ConfigError(f"subset of {count} requested from {n} items")
    rng = np.random.default_rng(seed)
    classes = np.unique(dataset.labels)
    members = {c: np.flatnonzero(dataset.labels == c) for c in classes}
    quota = dict.fromkeys(classes, 0)
    remaining = count
    open_classes = list(classes)
    while remaining:
        open_classes = [c for c in open_classes if quota[c] < len(members[c])]
        share, extra = divmod(remaining, len(open_classes))
        lucky = set(rng.permutation(open_classes)[:extra].tolist())
        for c in open_classes:
            want = share + (1 if c in lucky else 0)
            got = min(want, len(members[c]) - quota[c])
            quota[c] += got
            remaining -= got
    picked = [rng.choice(members[c], size=quota[c], replace=False) for c in classes]
    indices = np.sort(np.concatenate(picked)) if picked else np.zeros(0, np.int64)
    return dataset.take(indices)

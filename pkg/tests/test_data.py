import gzip
import struct

import numpy as np
import pytest

from mlsom.data import (
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    LabeledImageSet,
    cifar10_bytes,
    idx_bytes,
    load_cifar10,
    load_dataset,
    load_mnist,
    subset,
    write_cifar10,
    write_mnist,
)
from mlsom.errors import (
    BadMagicError,
    ConfigError,
    CountMismatchError,
    DataError,
    ParseError,
    TruncatedFileError,
)


@pytest.fixture
def idx_pair(tmp_path, rng):
    images = rng.integers(0, 256, (2, 28, 28), dtype=np.uint8)
    labels = np.array([3, 7], dtype=np.uint8)
    ip, lp = tmp_path / "img", tmp_path / "lbl"
    ip.write_bytes(idx_bytes(images, IDX_IMAGES_MAGIC))
    lp.write_bytes(idx_bytes(labels, IDX_LABELS_MAGIC))
    return ip, lp, images, labels


def test_idx_header_layout():
    buf = idx_bytes(np.zeros((2, 28, 28), np.uint8), IDX_IMAGES_MAGIC)
    assert buf[:16] == bytes.fromhex("00000803 00000002 0000001c 0000001c".replace(" ", ""))


def test_idx_round_trip(idx_pair, tmp_path):
    ip, lp, images, labels = idx_pair
    ds = load_mnist(ip, lp)
    assert ds.images.shape == (2, 28, 28, 1)
    np.testing.assert_array_equal(ds.images[..., 0], images)
    np.testing.assert_array_equal(ds.labels, labels)
    write_mnist(tmp_path / "i2", tmp_path / "l2", ds)
    assert (tmp_path / "i2").read_bytes() == ip.read_bytes()
    assert (tmp_path / "l2").read_bytes() == lp.read_bytes()


def test_idx_gzip(idx_pair, tmp_path):
    ip, lp, images, _ = idx_pair
    gz = tmp_path / "img.gz"
    gz.write_bytes(gzip.compress(ip.read_bytes()))
    np.testing.assert_array_equal(load_mnist(gz, lp).images[..., 0], images)


def test_idx_truncated(idx_pair):
    ip, lp, _, _ = idx_pair
    ip.write_bytes(ip.read_bytes()[:16 + 784])
    with pytest.raises(TruncatedFileError) as info:
        load_mnist(ip, lp)
    assert info.value.field == "data"


def test_idx_bad_magic(idx_pair):
    ip, lp, _, _ = idx_pair
    ip.write_bytes(struct.pack(">I", 0x801) + ip.read_bytes()[4:])
    with pytest.raises(BadMagicError) as info:
        load_mnist(ip, lp)
    assert info.value.field == "magic"


def test_idx_count_mismatch(idx_pair):
    ip, lp, _, _ = idx_pair
    lp.write_bytes(idx_bytes(np.array([1], np.uint8), IDX_LABELS_MAGIC))
    with pytest.raises(CountMismatchError):
        load_mnist(ip, lp)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_mnist(tmp_path / "nope", tmp_path / "nada")


def test_cifar_record_round_trip(tmp_path):
    record = bytearray([6])
    record += bytes([10] * 1024) + bytes([20] * 1024) + bytes([30] * 1024)
    record[1 + 5] = 99  # red plane, row 0, col 5
    record[1 + 1024 + 32 * 2 + 1] = 77  # green plane, row 2, col 1
    path = tmp_path / "b.bin"
    path.write_bytes(bytes(record))
    ds = load_cifar10([path])
    assert ds.images.shape == (1, 32, 32, 3)
    assert ds.labels.tolist() == [6]
    assert ds.images[0, 0, 5].tolist() == [99, 20, 30]
    assert ds.images[0, 2, 1].tolist() == [10, 77, 30]
    assert cifar10_bytes(ds) == bytes(record)
    write_cifar10(tmp_path / "c.bin", ds)
    assert (tmp_path / "c.bin").read_bytes() == bytes(record)


def test_cifar_empty_and_bad_size(tmp_path):
    empty = tmp_path / "e.bin"
    empty.write_bytes(b"")
    assert len(load_cifar10([empty])) == 0
    bad = tmp_path / "x.bin"
    bad.write_bytes(b"\0" * 3074)
    with pytest.raises(ParseError):
        load_cifar10([bad])


def test_load_dataset_layout(tmp_path, rng):
    ds = LabeledImageSet(rng.integers(0, 256, (4, 32, 32, 3), dtype=np.uint8),
                         np.array([0, 1, 2, 3], np.uint8))
    sub = tmp_path / "cifar-10-batches-bin"
    sub.mkdir()
    for name in ["data_batch_%d.bin" % i for i in range(1, 6)] + ["test_batch.bin"]:
        write_cifar10(sub / name, ds)
    assert len(load_dataset("cifar10", tmp_path, "train")) == 20
    assert len(load_dataset("cifar10", tmp_path, "test")) == 4
    with pytest.raises(DataError):
        load_dataset("mnist", tmp_path, "train")


def balanced(rng, per_class=150):
    labels = np.repeat(np.arange(10), per_class).astype(np.uint8)
    rng.shuffle(labels)
    images = np.arange(len(labels), dtype=np.uint8)[:, None, None, None] * np.ones((1, 2, 2, 1), np.uint8)
    return LabeledImageSet(images, labels)


def test_subset_stratified(rng):
    ds = balanced(rng)
    sub = subset(ds, 1000, seed=1)
    assert np.bincount(sub.labels).tolist() == [100] * 10


def test_subset_identity_and_determinism(rng):
    ds = balanced(rng)
    full = subset(ds, len(ds), seed=3)
    np.testing.assert_array_equal(full.labels, ds.labels)
    np.testing.assert_array_equal(full.images, ds.images)
    a, b = subset(ds, 333, seed=5), subset(ds, 333, seed=5)
    np.testing.assert_array_equal(a.images, b.images)
    assert sorted(np.bincount(a.labels)) == [33] * 7 + [34] * 3


def test_subset_small_class_spills_over():
    labels = np.array([0] * 2 + [1] * 20, np.uint8)
    ds = LabeledImageSet(np.zeros((22, 1, 1, 1), np.uint8), labels)
    assert np.bincount(subset(ds, 10, seed=0).labels).tolist() == [2, 8]


def test_subset_too_large(rng):
    with pytest.raises(ConfigError):
        subset(balanced(rng), 10_000)


def test_official_mnist_headers(mnist):
    train, test = mnist
    assert train.images.shape == (60000, 28, 28, 1)
    assert test.images.shape == (10000, 28, 28, 1)
    assert train.labels.max() == 9 and test.labels.min() == 0

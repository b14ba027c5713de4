"""Linear softmax read-out trained with mini-batch SGD on cross-entropy."""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    DataError,
    DimensionError,
    ParseError,
    TrainingError,
    TruncatedFileError,
)

CLF_MAGIC = b"MLCLF1\0"
_CLF_HEADER = struct.Struct("<II")

LOG_EPS = 1e-12


@dataclass
class LinearClassifier:
    weights: np.ndarray  # (num_classes, feature_dim)
    bias: np.ndarray  # (num_classes,)

    @classmethod
    def zeros(cls, num_classes, feature_dim):
        return cls(np.zeros((num_classes, feature_dim)), np.zeros(num_classes))

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def feature_dim(self):
        return self.weights.shape[1]

    def copy(self):
        return LinearClassifier(self.weights.copy(), self.bias.copy())


@dataclass
class TrainReport:
    loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    test_accuracy: float = None

    def to_dict(self):
        return {
            "loss": self.loss,
            "train_accuracy": self.train_accuracy,
            "test_accuracy": self.test_accuracy,
        }


def softmax(logits):
    """Row-wise softmax with max subtraction; accepts 1-D or 2-D input."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _features(clf, features):
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != clf.feature_dim:
        raise DimensionError(
            f"feature length {x.shape[-1]} does not match classifier dim {clf.feature_dim}"
        )
    return x


def forward(clf, features):
    """Class probabilities for one feature vector or a (batch, dim) matrix."""
    x = _features(clf, features)
    return softmax(x @ clf.weights.T + clf.bias)


def cross_entropy(pred, label):
    """Negative log-likelihood of `label`; log is clamped at log(1e-12)."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim == 1:
        return float(-np.log(max(pred[label], LOG_EPS)))
    picked = pred[np.arange(len(pred)), np.asarray(label)]
    return -np.log(np.maximum(picked, LOG_EPS))


def gradients(clf, features, labels):
    """Mean softmax cross-entropy gradient over a batch.

    Returns:
        (grad_weights, grad_bias, per_example_probabilities)
    """
    x = np.atleast_2d(_features(clf, features))
    labels = np.atleast_1d(labels)
    probs = forward(clf, x)
    delta = probs.copy()
    delta[np.arange(len(labels)), labels] -= 1.0
    delta /= len(labels)
    return delta.T @ x, delta.sum(axis=0), probs


def grad_step(clf, features, label, clf_lr):
    """Single-example SGD step; returns the loss before the update."""
    gw, gb, probs = gradients(clf, features, label)
    loss = cross_entropy(probs[0], int(np.atleast_1d(label)[0]))
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}")
    clf.weights -= clf_lr * gw
    clf.bias -= clf_lr * gb
    return loss


def train_classifier(clf, features, labels, epochs, clf_lr=0.1, batch_size=64, seed=0,
                     progress=None):
    """Mini-batch SGD with averaged gradients and a seeded per-epoch shuffle.

    `features` may be uint8 feature maps; batches are cast to float64 lazily so
    a full training set stays compact in memory.
    """
    features = np.asarray(features)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) == 0:
        raise DataError("cannot train a classifier on an empty dataset")
    if len(features) != len(labels):
        raise DataError(f"{len(features)} feature rows but {len(labels)} labels")
    features = features.reshape(len(features), -1)
    rng = np.random.default_rng(seed)
    report = TrainReport()
    n = len(features)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total_loss, correct = 0.0, 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            y = labels[idx]
            gw, gb, probs = gradients(clf, features[idx], y)
            losses = cross_entropy(probs, y)
            total_loss += losses.sum()
            correct += int((probs.argmax(axis=1) == y).sum())
            clf.weights -= clf_lr * gw
            clf.bias -= clf_lr * gb
        if not np.isfinite(total_loss):
            raise TrainingError(f"non-finite loss in classifier epoch {epoch}")
        report.loss.append(total_loss / n)
        report.train_accuracy.append(correct / n)
        if progress is not None:
            progress(epoch, report.loss[-1], report.train_accuracy[-1])
    return report


def predict(clf, features, batch_size=4096):
    features = np.asarray(features)
    features = features.reshape(len(features), -1)
    out = np.empty(len(features), dtype=np.int64)
    for start in range(0, len(features), batch_size):
        x = _features(clf, features[start:start + batch_size])
        # argmax returns the first maximum: ties go to the lowest class index
        out[start:start + batch_size] = (x @ clf.weights.T + clf.bias).argmax(axis=1)
    return out


def evaluate(clf, features, labels):
    """Fraction of examples whose arg-max class equals the label."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    return float((predict(clf, features) == labels).mean())


def save_classifier(clf, path):
    with open(path, "wb") as f:
        f.write(classifier_to_bytes(clf))


def classifier_to_bytes(clf):
    header = CLF_MAGIC + _CLF_HEADER.pack(clf.num_classes, clf.feature_dim)
    return (header + np.ascontiguousarray(clf.weights, dtype="<f4").tobytes()
            + np.ascontiguousarray(clf.bias, dtype="<f4").tobytes())


def load_classifier(path):
    with open(path, "rb") as f:
        return classifier_from_bytes(f.read())


def classifier_from_bytes(buf):
    if buf[:len(CLF_MAGIC)] != CLF_MAGIC:
        raise BadMagicError("bad magic in classifier checkpoint", field="magic")
    off = len(CLF_MAGIC)
    if len(buf) < off + _CLF_HEADER.size:
        raise TruncatedFileError("classifier checkpoint header truncated", field="header")
    num_classes, dim = _CLF_HEADER.unpack_from(buf, off)
    off += _CLF_HEADER.size
    expected = (num_classes * dim + num_classes) * 4
    body = buf[off:]
    if len(body) < expected:
        raise TruncatedFileError(
            f"classifier body truncated: {len(body)} of {expected} bytes", field="weights"
        )
    if len(body) > expected:
        raise ParseError("trailing bytes after classifier bias", field="bias")
    values = np.frombuffer(body, dtype="<f4").astype(np.float64)
    weights = values[:num_classes * dim].reshape(num_classes, dim)
    return LinearClassifier(weights, values[num_classes * dim:].copy())

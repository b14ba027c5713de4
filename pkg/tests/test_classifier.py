import math

import numpy as np
import pytest

from mlsom.classifier import (
    LinearClassifier,
    classifier_from_bytes,
    classifier_to_bytes,
    cross_entropy,
    evaluate,
    forward,
    grad_step,
    gradients,
    train_classifier,
)
from mlsom.errors import BadMagicError, DataError, DimensionError, TruncatedFileError


def scalar_softmax(weights, bias, x):
    logits = [sum(w * v for w, v in zip(row, x)) + b for row, b in zip(weights, bias)]
    m = max(logits)
    e = [math.exp(z - m) for z in logits]
    s = sum(e)
    return [v / s for v in e]


def random_clf(r, classes=4, dim=6):
    return LinearClassifier(r.standard_normal((classes, dim)), r.standard_normal(classes))


def test_zero_classifier_is_uniform():
    p = forward(LinearClassifier.zeros(10, 5), np.ones(5))
    np.testing.assert_allclose(p, 0.1)


def test_shift_invariance(rng):
    clf = random_clf(rng)
    x = rng.random(6)
    shifted = LinearClassifier(clf.weights, clf.bias + 123.0)
    np.testing.assert_allclose(forward(clf, x), forward(shifted, x), atol=1e-9)


def test_matches_scalar_oracle(rng):
    clf = random_clf(rng, 10, 20)
    x = rng.random(20)
    np.testing.assert_allclose(forward(clf, x), scalar_softmax(clf.weights, clf.bias, x),
                               atol=1e-9)


def test_extreme_logits_stay_normalized():
    clf = LinearClassifier(np.array([[1e4], [-1e4], [0.0]]), np.zeros(3))
    p = forward(clf, np.array([1.0]))
    assert np.isfinite(p).all() and abs(p.sum() - 1) < 1e-9


def test_dimension_error():
    with pytest.raises(DimensionError):
        forward(LinearClassifier.zeros(3, 4), np.ones(5))


def test_cross_entropy_values():
    assert cross_entropy(np.array([0.0, 1.0]), 1) == 0.0
    assert cross_entropy(np.full(10, 0.1), 3) == pytest.approx(2.302585093, abs=1e-9)
    assert cross_entropy(np.array([0.5, 0.5]), 0) == pytest.approx(0.693147181, abs=1e-9)
    assert cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))


def test_optimum_leaves_parameters(rng):
    clf = LinearClassifier(np.array([[100.0, 0], [-100.0, 0]]), np.zeros(2))
    before = clf.copy()
    grad_step(clf, np.array([1.0, 0.0]), 0, 0.1)
    np.testing.assert_allclose(clf.weights, before.weights, atol=1e-12)
    np.testing.assert_allclose(clf.bias, before.bias, atol=1e-12)


def test_single_example_loss_non_increasing(rng):
    clf = random_clf(rng)
    x = rng.random(6)
    losses = [grad_step(clf, x, 2, 0.1) for _ in range(100)]
    assert all(b <= a + 1e-15 for a, b in zip(losses, losses[1:]))


def test_batch_gradient_is_mean_of_singles(rng):
    clf = random_clf(rng)
    x = rng.random((5, 6))
    y = np.array([0, 1, 2, 3, 0])
    gw, gb, _ = gradients(clf, x, y)
    singles = [gradients(clf, x[i], y[i]) for i in range(5)]
    np.testing.assert_allclose(gw, np.mean([s[0] for s in singles], axis=0), atol=1e-14)
    np.testing.assert_allclose(gb, np.mean([s[1] for s in singles], axis=0), atol=1e-14)


def test_zero_epochs(rng):
    clf = LinearClassifier.zeros(2, 3)
    report = train_classifier(clf, rng.random((4, 3)), [0, 1, 0, 1], 0)
    assert report.loss == [] and not clf.weights.any()


def test_separable_toy_set():
    x = np.array([[1, 0], [0, 1]] * 20, dtype=np.uint8)
    y = np.array([0, 1] * 20)
    clf = LinearClassifier.zeros(2, 2)
    report = train_classifier(clf, x, y, epochs=50, clf_lr=0.1, batch_size=8)
    assert evaluate(clf, x, y) == 1.0
    assert 0 <= report.loss[-1] < report.loss[0]
    assert all(0 <= a <= 1 for a in report.train_accuracy)


def test_deterministic(rng):
    x = rng.integers(0, 2, (50, 8)).astype(np.uint8)
    y = rng.integers(0, 3, 50)
    a, b = LinearClassifier.zeros(3, 8), LinearClassifier.zeros(3, 8)
    train_classifier(a, x, y, 5, seed=4)
    train_classifier(b, x, y, 5, seed=4)
    assert classifier_to_bytes(a) == classifier_to_bytes(b)


def test_empty_and_misaligned():
    with pytest.raises(DataError):
        train_classifier(LinearClassifier.zeros(2, 2), np.zeros((0, 2)), [], 1)
    with pytest.raises(DataError):
        train_classifier(LinearClassifier.zeros(2, 2), np.zeros((3, 2)), [0, 1], 1)


def test_evaluate_tie_break_and_oracle(rng):
    x = rng.random((100, 4))
    y = np.repeat(np.arange(10), 10)
    assert evaluate(LinearClassifier.zeros(10, 4), x, y) == pytest.approx(0.1)
    clf = LinearClassifier(rng.standard_normal((10, 4)), rng.standard_normal(10))
    probs = forward(clf, x)
    oracle = [max(range(10), key=lambda c: (p[c], -c)) for p in probs]
    assert evaluate(clf, x, np.array(oracle)) == 1.0


def test_checkpoint_round_trip(rng):
    clf = random_clf(rng, 10, 16)
    buf = classifier_to_bytes(clf)
    assert buf[:7] == b"MLCLF1\0"
    assert classifier_to_bytes(classifier_from_bytes(buf)) == buf
    with pytest.raises(BadMagicError):
        classifier_from_bytes(b"XXXXXX\0" + buf[7:])
    with pytest.raises(TruncatedFileError):
        classifier_from_bytes(buf[:-3])

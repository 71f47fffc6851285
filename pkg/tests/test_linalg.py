import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from alstm_traffic.linalg import activate, affine, softmax

finite = st.floats(-50, 50, allow_nan=False)


def test_affine_identity():
    np.testing.assert_array_equal(affine(np.eye(2), np.array([3.0, -1.0]), np.zeros(2)), [3.0, -1.0])


def test_affine_hand_multiplication():
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(affine(W, np.ones(2), np.ones(2)), [4.0, 8.0])


def test_affine_zero_matrix():
    out = affine(np.zeros((1, 3)), np.array([7.0, -2.0, 0.5]), np.array([5.0]))
    np.testing.assert_array_equal(out, [5.0])


@pytest.mark.parametrize(
    "W, x, b",
    [
        (np.zeros((2, 3)), np.zeros(2), np.zeros(2)),
        (np.zeros((2, 3)), np.zeros(3), np.zeros(3)),
    ],
)
def test_affine_dimension_mismatch(W, x, b):
    with pytest.raises(ValueError, match=r"\d"):
        affine(W, x, b)


def test_affine_batched_rows():
    rng = np.random.default_rng(3)
    W, b = rng.normal(size=(4, 3)), rng.normal(size=4)
    X = rng.normal(size=(5, 3))
    out = affine(W, X, b)
    for k in range(5):
        np.testing.assert_allclose(out[k], oracles.matvec(W.tolist(), X[k].tolist()) + b, atol=1e-12)


def test_activations_fixed_points():
    assert activate(np.array([0.0]), "sigmoid")[0] == 0.5
    assert activate(np.array([0.0]), "tanh")[0] == 0.0
    assert activate(np.array([math.log(3.0)]), "sigmoid")[0] == pytest.approx(0.75, abs=1e-15)


def test_sigmoid_saturates_without_overflow():
    out = activate(np.array([-1000.0, 1000.0]), "sigmoid")
    assert np.all(np.isfinite(out))
    assert out[0] == 0.0 and out[1] == 1.0


def test_unknown_activation():
    with pytest.raises(ValueError):
        activate(np.zeros(1), "relu")


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=8))
def test_sigmoid_strictly_increasing(vals):
    v = np.sort(np.unique(np.array(vals)))
    out = activate(v, "sigmoid")
    # strict wherever float64 can resolve the difference
    distinct = np.diff(v) > 1e-3
    assert np.all(np.diff(out)[distinct] > 0)


def test_softmax_examples():
    np.testing.assert_allclose(softmax(np.full(4, 3.7)), [0.25] * 4, atol=1e-15)
    np.testing.assert_allclose(softmax(np.array([0.0, math.log(3.0)])), [0.25, 0.75], atol=1e-15)


def test_softmax_empty():
    with pytest.raises(ValueError):
        softmax(np.array([]))


@given(arrays(np.float64, st.integers(1, 10), elements=finite), st.floats(-100, 100))
def test_softmax_sums_to_one_and_shift_invariant(e, c):
    a = softmax(e)
    assert abs(a.sum() - 1.0) < 1e-12
    assert np.all((a > 0) & (a <= 1))
    np.testing.assert_allclose(softmax(e + c), a, atol=1e-12)


def test_softmax_matches_scalar_oracle():
    e = np.random.default_rng(0).normal(size=6) * 3
    np.testing.assert_allclose(softmax(e), oracles.softmax(e.tolist()), atol=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_affine_is_linear(seed, a):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(3, 4))
    x, y = rng.normal(size=4), rng.normal(size=4)
    z = np.zeros(3)
    np.testing.assert_allclose(affine(W, a * x + y, z), a * affine(W, x, z) + affine(W, y, z), atol=1e-10)

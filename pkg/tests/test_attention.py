import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from alstm_traffic.attention import (
    AttentionParams,
    align,
    attend,
    attention_backward,
    attention_forward,
    attention_output,
)


def random_attn(h=2, q=2, m=2, p=3, seed=0, scale=0.8):
    rng = np.random.default_rng(seed)
    u = lambda *s: rng.uniform(-scale, scale, size=s)  # noqa: E731
    return AttentionParams(u(m, h), u(m, q), u(m), u(m), u(p, h), u(p))


def as_lists(a):
    return {k: getattr(a, k).tolist() for k in ("W_h", "W_s", "b_a", "v_a", "V_out", "b_v")}


def test_zero_score_vector():
    a = random_attn(seed=1)
    a.v_a[:] = 0.0
    hs = np.random.default_rng(0).normal(size=(4, 2))
    np.testing.assert_array_equal(align(hs[-1], hs, a), 0.0)


def test_identical_hiddens_identical_scores():
    a = random_attn(seed=2)
    hs = np.array([[0.3, -0.2], [0.3, -0.2], [0.9, 0.1]])
    e = align(np.array([0.5, 0.5]), hs, a)
    assert e[0] == e[1]


def test_align_matches_scalar_oracle():
    a = random_attn(h=2, q=1, m=2, seed=3)
    rng = np.random.default_rng(4)
    hs, q = rng.normal(size=(3, 2)), rng.normal(size=1)
    np.testing.assert_allclose(align(q, hs, a), oracles.align(q.tolist(), hs.tolist(), as_lists(a)), atol=1e-12, rtol=0)


def test_align_rejects_empty():
    a = random_attn()
    with pytest.raises(ValueError):
        align(np.zeros(2), np.zeros((0, 2)), a)


def test_attend_saturated_selects_first():
    hs = np.random.default_rng(5).normal(size=(3, 2))
    w, r = attend(np.array([40.0, 0.0, 0.0]), hs)
    assert w[0] == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(r, hs[0], atol=1e-9)


def test_attend_uniform_is_mean():
    hs = np.random.default_rng(6).normal(size=(4, 3))
    w, r = attend(np.full(4, 0.7), hs)
    np.testing.assert_allclose(w, 0.25, atol=1e-15)
    np.testing.assert_allclose(r, hs.mean(axis=0), atol=1e-12)


def test_attend_matches_direct_sum():
    rng = np.random.default_rng(7)
    hs, e = rng.normal(size=(3, 2)), rng.normal(size=3)
    w, r = attend(e, hs)
    alpha_ref, r_ref = oracles.attend(e.tolist(), hs.tolist())
    np.testing.assert_allclose(w, alpha_ref, atol=1e-12, rtol=0)
    np.testing.assert_allclose(r, r_ref, atol=1e-12, rtol=0)
    assert abs(w.sum() - 1.0) < 1e-12


def test_attend_dim_mismatch():
    with pytest.raises(ValueError):
        attend(np.zeros(2), np.zeros((3, 2)))


def test_attention_output_examples():
    a = random_attn(h=2, p=2)
    a.V_out[:] = 0.0
    a.b_v[:] = 0.0
    np.testing.assert_array_equal(attention_output(np.array([0.4, 2.0]), a), 0.0)
    a.V_out[:] = np.eye(2)
    y = attention_output(np.array([0.5, -0.5]), a)
    np.testing.assert_allclose(y, [math.tanh(0.5), -math.tanh(0.5)], atol=1e-15)
    assert y[0] == pytest.approx(0.4621, abs=1e-4)


def test_attention_output_matches_scalar_oracle():
    a = random_attn(h=3, p=4, seed=8)
    r = np.random.default_rng(9).normal(size=3)
    np.testing.assert_allclose(attention_output(r, a), oracles.attention_output(r.tolist(), as_lists(a)), atol=1e-12)


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_permutation_and_convex_hull(seed, L):
    rng = np.random.default_rng(seed)
    a = random_attn(h=3, q=3, m=4, seed=seed)
    hs, q = rng.normal(size=(L, 3)), rng.normal(size=3)
    e = align(q, hs, a)
    w, r = attend(e, hs)
    perm = rng.permutation(L)
    e_p = align(q, hs[perm], a)
    w_p, r_p = attend(e_p, hs[perm])
    np.testing.assert_allclose(e_p, e[perm], atol=1e-12)
    np.testing.assert_allclose(w_p, w[perm], atol=1e-12)
    np.testing.assert_allclose(r_p, r, atol=1e-12)
    assert np.all(r >= hs.min(axis=0) - 1e-12) and np.all(r <= hs.max(axis=0) + 1e-12)


@given(st.floats(-50, 50))
def test_score_shift_invariance(c):
    rng = np.random.default_rng(1)
    a = random_attn(h=2, p=2)
    hs, e = rng.normal(size=(5, 2)), rng.normal(size=5)
    w, r = attend(e, hs)
    w2, r2 = attend(e + c, hs)
    np.testing.assert_allclose(w2, w, atol=1e-12)
    np.testing.assert_allclose(r2, r, atol=1e-12)
    np.testing.assert_allclose(attention_output(r2, a), attention_output(r, a), atol=1e-12)


def _loss_and_grads(a, hs, q, wy):
    cache = attention_forward(q, hs, a)
    return float(wy @ cache.output), attention_backward(cache, wy, a)


def _flat(a, hs, q):
    return np.concatenate([t.ravel() for t in a.tensors()] + [hs.ravel(), q])


def _unflat(theta, a, hs, q):
    shapes = [t.shape for t in a.tensors()]
    parts, pos = [], 0
    for s in shapes:
        n = int(np.prod(s))
        parts.append(theta[pos : pos + n].reshape(s))
        pos += n
    hs2 = theta[pos : pos + hs.size].reshape(hs.shape)
    return AttentionParams(*parts), hs2, theta[pos + hs.size :]


def test_zero_upstream_zero_gradients():
    a = random_attn()
    hs = np.random.default_rng(0).normal(size=(3, 2))
    cache = attention_forward(hs[-1], hs, a)
    grads, dh, dq = attention_backward(cache, np.zeros(3), a)
    for g in grads.tensors() + [dh, dq]:
        assert not np.any(g)


@pytest.mark.parametrize("saturate", [False, True])
def test_backward_finite_differences(saturate):
    rng = np.random.default_rng(21)
    a = random_attn(h=2, q=2, m=3, p=3, seed=22)
    hs, q, wy = rng.normal(size=(2, 2)), rng.normal(size=2), rng.normal(size=3)
    if saturate:
        # push one score to dominate: alpha for the other is ~0
        a.v_a[:] = np.sign(a.v_a) * 25.0
    _, (grads, dh, dq) = _loss_and_grads(a, hs, q, wy)
    analytic = np.concatenate([g.ravel() for g in grads.tensors()] + [dh.ravel(), dq])
    theta = _flat(a, hs, q)

    def f(th):
        return _loss_and_grads(*_unflat(th, a, hs, q), wy)[0]

    numeric = oracles.central_diff(f, theta)
    assert np.all(np.isfinite(analytic))
    assert oracles.max_rel_err(analytic, numeric) < 1e-5


def test_batched_backward_sums_rows():
    rng = np.random.default_rng(3)
    a = random_attn(h=2, q=2, m=3, p=2, seed=4)
    hs, wy = rng.normal(size=(3, 4, 2)), rng.normal(size=(3, 2))
    cache = attention_forward(hs[:, -1], hs, a)
    grads, dh, _ = attention_backward(cache, wy, a)
    total = [np.zeros_like(t) for t in a.tensors()]
    for k in range(3):
        c = attention_forward(hs[k, -1], hs[k], a)
        g, dhk, _ = attention_backward(c, wy[k], a)
        for acc, gt in zip(total, g.tensors()):
            acc += gt
        np.testing.assert_allclose(dh[k], dhk, atol=1e-14)
    for g, t in zip(grads.tensors(), total):
        np.testing.assert_allclose(g, t, atol=1e-13)

import math

import numpy as np
import pytest

import oracles
from alstm_traffic.network import (
    ModelVariant,
    forward,
    init_params,
    load_checkpoint,
    loss_and_grad,
    mse_loss,
    n_params,
    param_count,
    params_digest,
    save_checkpoint,
    unflatten,
)


def small(kind, h=3, exo=2, L=3, m=2, out=2, query="last"):
    return ModelVariant(
        kind=kind, hidden_size=h, attention_size=m, output_size=out, n_lags=L, exo_dim=exo, query=query
    )


def as_dict(p):
    d = {k: getattr(p.lstm, k).tolist() for k in ("W_f", "W_i", "W_c", "W_o", "b_f", "b_i", "b_c", "b_o")}
    if p.attn is not None:
        d.update({k: getattr(p.attn, k).tolist() for k in ("W_h", "W_s", "b_a", "v_a", "V_out", "b_v")})
    else:
        d["proj_W"], d["proj_b"] = p.proj_W.tolist(), p.proj_b.tolist()
    d["head_W"], d["head_b"] = p.head_W.tolist(), p.head_b.tolist()
    return d


def randomized(v, seed, scale=0.7):
    """Every tensor (biases included) drawn uniformly so no slot is trivially zero."""
    rng = np.random.default_rng(seed)
    return unflatten(rng.uniform(-scale, scale, n_params(v)), v)


def sample(v, n, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, (n, v.n_lags, 2)), rng.uniform(-1, 1, (n, v.exo_size)), rng.uniform(0, 1, (n, 2))


@pytest.mark.parametrize("kind", ["lstm", "alstm"])
def test_zero_params_predict_half(kind):
    v = ModelVariant(kind=kind)
    p = unflatten(np.zeros(n_params(v)), v)
    lags, exo, _ = sample(v, 3, 0)
    np.testing.assert_array_equal(forward(lags, exo, p, v)[0], 0.5)


@pytest.mark.parametrize("kind", ["lstm", "alstm"])
def test_forward_matches_scalar_oracle(kind):
    v = small(kind)
    p = randomized(v, 1)
    lags, exo, _ = sample(v, 2, 2)
    pred = forward(lags, exo, p, v)[0]
    for k in range(2):
        ref = oracles.network(lags[k].tolist(), exo[k].tolist(), as_dict(p), kind)
        np.testing.assert_allclose(pred[k], ref, atol=1e-10, rtol=0)
        np.testing.assert_allclose(forward(lags[k], exo[k], p, v)[0], ref, atol=1e-10, rtol=0)


def test_uniform_attention_is_mean_of_hiddens():
    v = small("alstm", h=4, L=4, out=3)
    p = randomized(v, 3)
    p.attn.v_a[:] = 0.0
    lags, exo, _ = sample(v, 5, 4)
    pred, tape = forward(lags, exo, p, v)
    np.testing.assert_allclose(tape.attn.weights, 0.25, atol=1e-15)
    r = tape.hiddens.mean(axis=1)
    ref = 1 / (1 + np.exp(-(np.tanh(r @ p.attn.V_out.T + p.attn.b_v) @ p.head_W.T + p.head_b)))
    np.testing.assert_allclose(pred, ref, atol=1e-12, rtol=0)


def test_single_step_context_is_the_hidden_state():
    v = small("alstm", L=1)
    p = randomized(v, 5)
    lags, exo, _ = sample(v, 3, 6)
    _, tape = forward(lags, exo, p, v)
    np.testing.assert_allclose(tape.attn.context, tape.hiddens[:, 0], atol=1e-15)


def test_exo_is_fed_at_every_step():
    v = small("lstm")
    p = randomized(v, 7)
    lags, exo, _ = sample(v, 1, 8)
    _, tape = forward(lags, exo, p, v)
    for step in tape.steps:
        np.testing.assert_array_equal(step.x[:, 2:], exo)


def test_mse_examples():
    assert mse_loss(np.full((4, 2), 0.5), np.array([[0, 1], [1, 0], [0, 1], [1, 0]])) == 0.25
    assert mse_loss(np.array([[0.2, 0.3]]), np.array([[0.2, 0.3]])) == 0.0
    with pytest.raises(ValueError):
        mse_loss(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        mse_loss(np.zeros((2, 2)), np.zeros((3, 2)))


def test_forward_rejects_bad_shapes():
    v = small("alstm")
    p = randomized(v, 0)
    with pytest.raises(ValueError):
        forward(np.zeros((2, 4, 2)), np.zeros((2, 2)), p, v)
    with pytest.raises(ValueError):
        forward(np.zeros((2, 3, 2)), np.zeros((2, 5)), p, v)


@pytest.mark.parametrize(
    "v",
    [small("lstm"), small("alstm"), small("alstm", h=4, exo=6, L=4, m=3, out=3), small("alstm", query="learned")],
    ids=["lstm", "alstm", "alstm-wide", "alstm-learned-query"],
)
def test_full_model_gradient(v):
    theta = randomized(v, 11).flatten()
    lags, exo, tgt = sample(v, 2, 12)
    _, grad = loss_and_grad(theta, lags, exo, tgt, v)
    numeric = oracles.central_diff(lambda th: loss_and_grad(th, lags, exo, tgt, v)[0], theta)
    assert oracles.max_rel_err(grad, numeric) < 1e-5


@pytest.mark.parametrize("kind", ["lstm", "alstm"])
def test_batch_gradient_is_mean_of_singles(kind):
    v = small(kind)
    theta = randomized(v, 13).flatten()
    lags, exo, tgt = sample(v, 2, 14)
    _, g = loss_and_grad(theta, lags, exo, tgt, v)
    singles = [loss_and_grad(theta, lags[k : k + 1], exo[k : k + 1], tgt[k : k + 1], v)[1] for k in range(2)]
    np.testing.assert_allclose(g, np.mean(singles, axis=0), atol=1e-10, rtol=0)


def test_default_parameter_counts():
    a, b = ModelVariant(kind="alstm"), ModelVariant(kind="lstm")
    assert n_params(a) == 4 * 20 * (20 + 26 + 1) + 756 + 42 == 4558
    assert n_params(b) == 3760 + 20 * 21 + 42 == 4222
    p = init_params(a, 0)
    assert p.lstm.W_f.shape == (20, 46)
    assert param_count(p) == 4558
    assert n_params(ModelVariant(encoding="onehot")) == 4 * 20 * (20 + 37 + 1) + 756 + 42


def test_init_deterministic_and_bounded():
    v = ModelVariant()
    a, b, c = init_params(v, 3), init_params(v, 3), init_params(v, 4)
    assert params_digest(a) == params_digest(b) != params_digest(c)
    bound = math.sqrt(1 / 46)
    assert np.abs(a.lstm.W_f).max() <= bound
    assert np.abs(a.lstm.W_f).max() > 0.9 * bound
    assert not np.any(a.lstm.b_f) and not np.any(a.head_b) and not np.any(a.attn.b_a)


def test_unflatten_roundtrip_and_errors():
    v = small("alstm")
    p = randomized(v, 2)
    np.testing.assert_array_equal(unflatten(p.flatten(), v).flatten(), p.flatten())
    with pytest.raises(ValueError):
        unflatten(np.zeros(n_params(v) + 1), v)


@pytest.mark.parametrize("kind", ["lstm", "alstm"])
def test_checkpoint_roundtrip(tmp_path, kind):
    v = ModelVariant(kind=kind, interval=5, encoding="onehot")
    p = init_params(v, 9)
    save_checkpoint(tmp_path / "a.json", p, v, seed=9, split=1)
    q, v2, meta = load_checkpoint(tmp_path / "a.json")
    assert v2 == v and meta == {"seed": 9, "split": 1}
    np.testing.assert_array_equal(q.flatten(), p.flatten())
    save_checkpoint(tmp_path / "b.json", q, v2, **meta)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_load_rejects_foreign_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_checkpoint(path)

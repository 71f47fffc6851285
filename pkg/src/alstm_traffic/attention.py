"""Additive (Bahdanau-style) attention over encoder hidden states.

Scores are ``e_i = v_a . tanh(W_h h_i + W_s q + b_a)``; weights are their
softmax; the context is the weighted sum of hidden states and the block
output is ``tanh(V_out r + b_v)``.

Hidden states are passed as an array of shape ``(L, h)`` or ``(batch, L, h)``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .linalg import affine, batch_sum, outer_sum, softmax


@dataclass
class AttentionParams:
    W_h: np.ndarray  # (m, h)
    W_s: np.ndarray  # (m, q)
    b_a: np.ndarray  # (m,)
    v_a: np.ndarray  # (m,)
    V_out: np.ndarray  # (p, h)
    b_v: np.ndarray  # (p,)

    def __post_init__(self):
        m, h = self.W_h.shape
        if self.W_s.ndim != 2 or self.W_s.shape[0] != m:
            raise ValueError(f"W_s shape {self.W_s.shape} inconsistent with W_h {self.W_h.shape}")
        if self.b_a.shape != (m,) or self.v_a.shape != (m,):
            raise ValueError(f"b_a/v_a must have shape {(m,)}")
        if self.V_out.ndim != 2 or self.V_out.shape[1] != h:
            raise ValueError(f"V_out shape {self.V_out.shape} inconsistent with hidden size {h}")
        if self.b_v.shape != (self.V_out.shape[0],):
            raise ValueError(f"b_v must have shape {(self.V_out.shape[0],)}")

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[1]

    @property
    def query_size(self) -> int:
        return self.W_s.shape[1]

    @property
    def output_size(self) -> int:
        return self.V_out.shape[0]

    @classmethod
    def zeros(cls, hidden: int, query: int, inner: int, out: int) -> "AttentionParams":
        return cls(
            np.zeros((inner, hidden)),
            np.zeros((inner, query)),
            np.zeros(inner),
            np.zeros(inner),
            np.zeros((out, hidden)),
            np.zeros(out),
        )

    def tensors(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass
class AttentionCache:
    hiddens: np.ndarray
    query: np.ndarray
    u: np.ndarray  # tanh of the alignment pre-activation, (..., L, m)
    scores: np.ndarray
    weights: np.ndarray
    context: np.ndarray
    output: np.ndarray


def _check_hiddens(hiddens: np.ndarray, p: AttentionParams) -> None:
    if hiddens.ndim not in (2, 3) or hiddens.shape[-2] == 0:
        raise ValueError(f"hidden states must be (L, h) or (batch, L, h) with L >= 1, got {hiddens.shape}")
    if hiddens.shape[-1] != p.hidden_size:
        raise ValueError(f"hidden dim {hiddens.shape[-1]} != attention hidden size {p.hidden_size}")


def _alignment(query: np.ndarray, hiddens: np.ndarray, p: AttentionParams) -> tuple[np.ndarray, np.ndarray]:
    _check_hiddens(hiddens, p)
    if query.shape[-1] != p.query_size or query.shape[:-1] != hiddens.shape[:-2]:
        raise ValueError(f"query shape {query.shape} inconsistent with hiddens {hiddens.shape}")
    proj_q = query @ p.W_s.T
    u = np.tanh(hiddens @ p.W_h.T + proj_q[..., None, :] + p.b_a)
    return u, u @ p.v_a


def align(query: np.ndarray, hiddens: np.ndarray, p: AttentionParams) -> np.ndarray:
    """Alignment scores, one per hidden state."""
    return _alignment(query, hiddens, p)[1]


def attend(scores: np.ndarray, hiddens: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax weights and the context vector ``sum_i alpha_i h_i``."""
    if hiddens.ndim not in (2, 3) or hiddens.shape[-2] == 0:
        raise ValueError(f"hidden states must be (L, h) or (batch, L, h) with L >= 1, got {hiddens.shape}")
    if scores.shape != hiddens.shape[:-1]:
        raise ValueError(f"{scores.shape[-1]} scores for {hiddens.shape[-2]} hidden states")
    weights = softmax(scores, axis=-1)
    context = np.einsum("...l,...lh->...h", weights, hiddens)
    return weights, context


def attention_output(context: np.ndarray, p: AttentionParams) -> np.ndarray:
    return np.tanh(affine(p.V_out, context, p.b_v))


def attention_forward(query: np.ndarray, hiddens: np.ndarray, p: AttentionParams) -> AttentionCache:
    u, scores = _alignment(query, hiddens, p)
    weights, context = attend(scores, hiddens)
    out = attention_output(context, p)
    return AttentionCache(hiddens, query, u, scores, weights, context, out)


def attention_backward(
    cache: AttentionCache, dy: np.ndarray, p: AttentionParams
) -> tuple[AttentionParams, np.ndarray, np.ndarray]:
    """Backpropagate ``dL/dy`` through output, context, softmax and scores.

    Returns ``(param_grads, d_hiddens, d_query)``.
    """
    if dy.shape != cache.output.shape:
        raise ValueError(f"upstream gradient shape {dy.shape} != attention output {cache.output.shape}")

    da = dy * (1.0 - cache.output**2)
    dV_out = outer_sum(da, cache.context)
    db_v = batch_sum(da)
    dr = da @ p.V_out

    # context = sum_i alpha_i h_i
    d_hiddens = cache.weights[..., None] * dr[..., None, :]
    d_alpha = np.einsum("...lh,...h->...l", cache.hiddens, dr)
    # softmax Jacobian couples every position
    de = cache.weights * (d_alpha - np.sum(cache.weights * d_alpha, axis=-1, keepdims=True))

    dv_a = de.reshape(-1) @ cache.u.reshape(-1, cache.u.shape[-1])
    dpre = de[..., None] * p.v_a * (1.0 - cache.u**2)
    dW_h = outer_sum(dpre, cache.hiddens)
    db_a = batch_sum(dpre)
    d_hiddens = d_hiddens + dpre @ p.W_h
    dproj_q = dpre.sum(axis=-2)
    dW_s = outer_sum(dproj_q, cache.query)
    d_query = dproj_q @ p.W_s

    grads = AttentionParams(dW_h, dW_s, db_a, dv_a, dV_out, db_v)
    return grads, d_hiddens, d_query

"""Dense vector/matrix helpers shared by the numeric modules.

Vectors and matrices are plain float64 numpy arrays. ``affine`` and the
activations accept an optional leading batch axis so the same code path
serves single windows and mini-batches.
"""

from __future__ import annotations

import numpy as np

Vec = np.ndarray
Mat = np.ndarray


def as_vec(values, name: str = "vector") -> Vec:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def as_mat(values, name: str = "matrix") -> Mat:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def affine(W: Mat, x: np.ndarray, b: Vec) -> np.ndarray:
    """Return ``W x + b``; ``x`` may carry leading batch axes."""
    if W.ndim != 2 or b.ndim != 1:
        raise ValueError(f"affine expects a matrix and a bias vector, got {W.shape} and {b.shape}")
    if x.shape[-1] != W.shape[1]:
        raise ValueError(f"affine: W is {W.shape[0]}x{W.shape[1]} but x has dim {x.shape[-1]}")
    if b.shape[0] != W.shape[0]:
        raise ValueError(f"affine: W has {W.shape[0]} rows but b has dim {b.shape[0]}")
    return x @ W.T + b


def sigmoid(x: np.ndarray) -> np.ndarray:
    # two-branch form avoids exp overflow for large |x|
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activate(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(np.asarray(x, dtype=np.float64))
    raise ValueError(f"unknown activation {kind!r}; expected 'sigmoid' or 'tanh'")


def softmax(e: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax along ``axis``."""
    e = np.asarray(e, dtype=np.float64)
    if e.size == 0 or e.shape[axis] == 0:
        raise ValueError("softmax of an empty vector is undefined")
    z = np.exp(e - e.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def outer_sum(delta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sum of outer products ``delta_b x_b^T`` over any leading batch axes."""
    if delta.ndim == 1:
        return np.outer(delta, x)
    return delta.reshape(-1, delta.shape[-1]).T @ x.reshape(-1, x.shape[-1])


def batch_sum(delta: np.ndarray) -> np.ndarray:
    """Collapse leading batch axes of a bias gradient."""
    if delta.ndim == 1:
        return delta.copy()
    return delta.reshape(-1, delta.shape[-1]).sum(axis=0)

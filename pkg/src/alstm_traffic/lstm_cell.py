"""Single LSTM building block: forward step and its analytic backward pass.

Gate pre-activations act on the concatenation ``[h_prev; x]`` (hidden state
first), so every weight matrix has shape ``hidden x (hidden + input)``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .linalg import affine, batch_sum, outer_sum, sigmoid

GATE_NAMES = ("W_f", "W_i", "W_c", "W_o", "b_f", "b_i", "b_c", "b_o")


@dataclass
class LstmParams:
    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        h, cols = self.W_f.shape
        for name in ("W_f", "W_i", "W_c", "W_o"):
            if getattr(self, name).shape != (h, cols):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(h, cols)}")
        for name in ("b_f", "b_i", "b_c", "b_o"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(h,)}")
        if cols <= h:
            raise ValueError("weight matrices need at least one input column beyond the hidden size")

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    @classmethod
    def zeros(cls, hidden: int, inputs: int) -> "LstmParams":
        W = lambda: np.zeros((hidden, hidden + inputs))  # noqa: E731
        b = lambda: np.zeros(hidden)  # noqa: E731
        return cls(W(), W(), W(), W(), b(), b(), b(), b())

    def tensors(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> "LstmState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class LstmStepTape:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    c_tilde: np.ndarray
    c: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray


def lstm_step(x: np.ndarray, prev: LstmState, p: LstmParams) -> tuple[LstmState, LstmStepTape]:
    """Advance one time step. ``x`` is ``(d,)`` or ``(batch, d)``."""
    if x.shape[-1] != p.input_size:
        raise ValueError(f"lstm_step: input dim {x.shape[-1]} != params input size {p.input_size}")
    if prev.h.shape[-1] != p.hidden_size or prev.c.shape != prev.h.shape:
        raise ValueError(
            f"lstm_step: state shapes {prev.h.shape}/{prev.c.shape} do not match hidden size {p.hidden_size}"
        )
    if prev.h.shape[:-1] != x.shape[:-1]:
        raise ValueError(f"lstm_step: batch shape of state {prev.h.shape[:-1]} != input {x.shape[:-1]}")

    z = np.concatenate([prev.h, x], axis=-1)
    f = sigmoid(affine(p.W_f, z, p.b_f))
    i = sigmoid(affine(p.W_i, z, p.b_i))
    c_tilde = np.tanh(affine(p.W_c, z, p.b_c))
    o = sigmoid(affine(p.W_o, z, p.b_o))
    c = f * prev.c + i * c_tilde
    tanh_c = np.tanh(c)
    h = o * tanh_c
    tape = LstmStepTape(x, prev.h, prev.c, f, i, c_tilde, c, o, tanh_c)
    return LstmState(h, c), tape


def lstm_step_backward(
    tape: LstmStepTape, dh: np.ndarray, dc: np.ndarray, p: LstmParams
) -> tuple[LstmParams, np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a step given upstream ``dL/dh_t`` and ``dL/dC_t``.

    Returns ``(param_grads, dx, dh_prev, dc_prev)``. Parameter gradients are
    summed over the batch axis when one is present.
    """
    if dh.shape != tape.c.shape or dc.shape != tape.c.shape:
        raise ValueError(
            f"lstm_step_backward: upstream shapes {dh.shape}/{dc.shape} != cached state {tape.c.shape}"
        )
    if tape.x.shape[-1] != p.input_size or tape.c.shape[-1] != p.hidden_size:
        raise ValueError("lstm_step_backward: tape does not match params")

    do = dh * tape.tanh_c
    dc_total = dc + dh * tape.o * (1.0 - tape.tanh_c**2)
    df = dc_total * tape.c_prev
    di = dc_total * tape.c_tilde
    dct = dc_total * tape.i
    dc_prev = dc_total * tape.f

    da_f = df * tape.f * (1.0 - tape.f)
    da_i = di * tape.i * (1.0 - tape.i)
    da_c = dct * (1.0 - tape.c_tilde**2)
    da_o = do * tape.o * (1.0 - tape.o)

    z = np.concatenate([tape.h_prev, tape.x], axis=-1)
    grads = LstmParams(
        outer_sum(da_f, z),
        outer_sum(da_i, z),
        outer_sum(da_c, z),
        outer_sum(da_o, z),
        batch_sum(da_f),
        batch_sum(da_i),
        batch_sum(da_c),
        batch_sum(da_o),
    )
    dz = da_f @ p.W_f + da_i @ p.W_i + da_c @ p.W_c + da_o @ p.W_o
    hsz = p.hidden_size
    return grads, dz[..., hsz:], dz[..., :hsz], dc_prev

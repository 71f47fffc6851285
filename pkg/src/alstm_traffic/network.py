"""Full forecasting models: LSTM encoder, attention or plain path, sigmoid head.

Flattened parameter order (used by the optimizer, checkpoints and gradient
checks):

1. LSTM: ``W_f, W_i, W_c, W_o, b_f, b_i, b_c, b_o``
2. A-LSTM: ``W_h, W_s, b_a, v_a, V_out, b_v`` (then ``query`` when the
   learned-query ablation is active); plain LSTM: ``proj_W, proj_b``
3. Head: ``head_W, head_b``

Each tensor is flattened row-major.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .attention import AttentionCache, AttentionParams, attention_backward, attention_forward
from .linalg import affine, batch_sum, outer_sum, sigmoid
from .lstm_cell import LstmParams, LstmState, LstmStepTape, lstm_step, lstm_step_backward

EXO_DIMS = {"cyclic": 24, "onehot": 35}
N_LAGS = 5
N_TARGETS = 2
KINDS = ("lstm", "alstm")
INTERVALS = (5, 15, 30)

CHECKPOINT_FORMAT = "alstm-traffic-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelVariant:
    """Model kind, input encoding and horizon, plus architecture sizes."""

    kind: str = "alstm"
    encoding: str = "cyclic"
    interval: int = 15
    hidden_size: int = 20
    attention_size: int = 8
    output_size: int = 20
    n_lags: int = N_LAGS
    exo_dim: int | None = None  # None -> derived from encoding
    query: str = "last"  # "last" encoder state or a "learned" constant

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.encoding not in EXO_DIMS:
            raise ValueError(f"encoding must be one of {tuple(EXO_DIMS)}, got {self.encoding!r}")
        if self.interval not in INTERVALS:
            raise ValueError(f"interval must be one of {INTERVALS}, got {self.interval!r}")
        if self.query not in ("last", "learned"):
            raise ValueError(f"query must be 'last' or 'learned', got {self.query!r}")
        for name in ("hidden_size", "attention_size", "output_size", "n_lags"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def exo_size(self) -> int:
        return EXO_DIMS[self.encoding] if self.exo_dim is None else self.exo_dim

    @property
    def step_input_size(self) -> int:
        return N_TARGETS + self.exo_size

    @property
    def window_input_dim(self) -> int:
        """Distinct input variables per window: lag pairs plus exogenous features."""
        return N_TARGETS * self.n_lags + self.exo_size

    @property
    def head_input_size(self) -> int:
        return self.output_size if self.kind == "alstm" else self.hidden_size


@dataclass
class SequenceWindow:
    lags: np.ndarray  # (n_lags, 2) normalized (V, S), oldest first
    exo: np.ndarray  # (exo_dim,)
    target: np.ndarray  # (2,)


@dataclass
class WindowSet:
    """A stack of windows; row ``k`` of each array is one ``SequenceWindow``."""

    lags: np.ndarray  # (N, n_lags, 2)
    exo: np.ndarray  # (N, exo_dim)
    target: np.ndarray  # (N, 2)
    timestamps: np.ndarray = field(default_factory=lambda: np.array([], dtype="datetime64[m]"))

    def __post_init__(self):
        n = self.lags.shape[0]
        if self.lags.ndim != 3 or self.lags.shape[2] != N_TARGETS:
            raise ValueError(f"lags must be (N, L, 2), got {self.lags.shape}")
        if self.exo.shape[0] != n or self.target.shape != (n, N_TARGETS):
            raise ValueError("lags, exo and target disagree on the number of windows")

    def __len__(self) -> int:
        return self.lags.shape[0]

    def __getitem__(self, idx) -> "WindowSet":
        idx = np.arange(len(self))[idx] if isinstance(idx, slice) else np.asarray(idx)
        if idx.size == 0:
            idx = idx.astype(np.intp)
        ts = self.timestamps[idx] if len(self.timestamps) == len(self) else self.timestamps
        return WindowSet(self.lags[idx], self.exo[idx], self.target[idx], ts)

    def window(self, k: int) -> SequenceWindow:
        return SequenceWindow(self.lags[k], self.exo[k], self.target[k])

    @classmethod
    def from_windows(cls, windows: list[SequenceWindow]) -> "WindowSet":
        return cls(
            np.stack([w.lags for w in windows]),
            np.stack([w.exo for w in windows]),
            np.stack([w.target for w in windows]),
        )


@dataclass
class ModelParams:
    lstm: LstmParams
    attn: AttentionParams | None
    query: np.ndarray | None  # learned query (ablation only)
    proj_W: np.ndarray | None
    proj_b: np.ndarray | None
    head_W: np.ndarray
    head_b: np.ndarray
    variant: ModelVariant | None = None

    def tensors(self) -> list[np.ndarray]:
        out = self.lstm.tensors()
        if self.attn is not None:
            out += self.attn.tensors()
            if self.query is not None:
                out.append(self.query)
        else:
            out += [self.proj_W, self.proj_b]
        return out + [self.head_W, self.head_b]

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors()])

    def copy(self) -> "ModelParams":
        return unflatten(self.flatten(), self.variant)


def _shapes(v: ModelVariant) -> list[tuple[int, ...]]:
    h, d = v.hidden_size, v.step_input_size
    shapes = [(h, h + d)] * 4 + [(h,)] * 4
    if v.kind == "alstm":
        m, p = v.attention_size, v.output_size
        shapes += [(m, h), (m, h), (m,), (m,), (p, h), (p,)]
        if v.query == "learned":
            shapes.append((h,))
    else:
        shapes += [(h, h), (h,)]
    shapes += [(N_TARGETS, v.head_input_size), (N_TARGETS,)]
    return shapes


def n_params(v: ModelVariant) -> int:
    return int(sum(np.prod(s) for s in _shapes(v)))


def unflatten(flat: np.ndarray, v: ModelVariant) -> ModelParams:
    """Inverse of ``ModelParams.flatten`` for the given variant."""
    flat = np.asarray(flat, dtype=np.float64)
    shapes = _shapes(v)
    total = int(sum(np.prod(s) for s in shapes))
    if flat.shape != (total,):
        raise ValueError(f"flat parameter vector has shape {flat.shape}, variant needs ({total},)")
    parts, pos = [], 0
    for s in shapes:
        size = int(np.prod(s))
        parts.append(flat[pos : pos + size].reshape(s).copy())
        pos += size
    lstm = LstmParams(*parts[:8])
    rest = parts[8:]
    if v.kind == "alstm":
        attn = AttentionParams(*rest[:6])
        query = rest[6] if v.query == "learned" else None
        proj_W = proj_b = None
    else:
        attn, query = None, None
        proj_W, proj_b = rest[0], rest[1]
    return ModelParams(lstm, attn, query, proj_W, proj_b, rest[-2], rest[-1], v)


def init_params(v: ModelVariant, seed: int) -> ModelParams:
    """Uniform(-s, s) weights with ``s = sqrt(1 / fan_in)``; zero biases.

    Tensors are drawn in flattening order from one seeded generator. A matrix's
    fan-in is its column count; the score vector ``v_a`` uses the attention
    inner size and a learned query uses the hidden size.
    """
    rng = np.random.default_rng([seed, 0])
    flat = []
    bias_slots = _bias_slots(v)
    for k, s in enumerate(_shapes(v)):
        if k in bias_slots:
            flat.append(np.zeros(int(np.prod(s))))
            continue
        fan_in = s[1] if len(s) == 2 else s[0]
        bound = np.sqrt(1.0 / fan_in)
        flat.append(rng.uniform(-bound, bound, size=int(np.prod(s))))
    return unflatten(np.concatenate(flat), v)


def _bias_slots(v: ModelVariant) -> set[int]:
    slots = {4, 5, 6, 7}
    n = len(_shapes(v))
    if v.kind == "alstm":
        slots |= {8 + 2, 8 + 5}  # b_a, b_v
    else:
        slots.add(8 + 1)  # proj_b
    slots.add(n - 1)  # head_b
    return slots


def param_count(p: ModelParams) -> int:
    return int(sum(t.size for t in p.tensors()))


@dataclass
class ForwardTape:
    steps: list[LstmStepTape]
    hiddens: np.ndarray  # (B, L, h)
    attn: AttentionCache | None
    proj_out: np.ndarray | None
    head_in: np.ndarray
    pred: np.ndarray  # (B, 2)


def _step_inputs(lags: np.ndarray, exo: np.ndarray, v: ModelVariant) -> np.ndarray:
    if lags.ndim != 3 or lags.shape[1:] != (v.n_lags, N_TARGETS):
        raise ValueError(f"lags must be (batch, {v.n_lags}, 2), got {lags.shape}")
    if exo.ndim != 2 or exo.shape != (lags.shape[0], v.exo_size):
        raise ValueError(f"exo must be (batch, {v.exo_size}), got {exo.shape}")
    ex = np.broadcast_to(exo[:, None, :], (lags.shape[0], v.n_lags, v.exo_size))
    return np.concatenate([lags, ex], axis=-1)


def forward(lags: np.ndarray, exo: np.ndarray, p: ModelParams, v: ModelVariant) -> tuple[np.ndarray, ForwardTape]:
    """Predict normalized ``(V, S)`` for a batch (or a single window).

    ``lags`` is ``(batch, L, 2)`` or ``(L, 2)``; ``exo`` matches with a
    leading batch axis or without one.
    """
    single = lags.ndim == 2
    if single:
        lags, exo = lags[None], exo[None]
    x = _step_inputs(np.asarray(lags, dtype=np.float64), np.asarray(exo, dtype=np.float64), v)
    batch = x.shape[0]
    state = LstmState.zeros(v.hidden_size, batch)
    steps, hs = [], []
    for t in range(v.n_lags):
        state, tape = lstm_step(x[:, t], state, p.lstm)
        steps.append(tape)
        hs.append(state.h)
    hiddens = np.stack(hs, axis=1)

    attn_cache = proj_out = None
    if v.kind == "alstm":
        query = hiddens[:, -1] if v.query == "last" else np.broadcast_to(p.query, (batch, v.hidden_size))
        attn_cache = attention_forward(query, hiddens, p.attn)
        head_in = attn_cache.output
    else:
        proj_out = np.tanh(affine(p.proj_W, hiddens[:, -1], p.proj_b))
        head_in = proj_out
    pred = sigmoid(affine(p.head_W, head_in, p.head_b))
    tape = ForwardTape(steps, hiddens, attn_cache, proj_out, head_in, pred)
    return (pred[0] if single else pred), tape


def predict(lags: np.ndarray, exo: np.ndarray, p: ModelParams, v: ModelVariant, chunk: int = 8192) -> np.ndarray:
    out = [forward(lags[k : k + chunk], exo[k : k + chunk], p, v)[0] for k in range(0, len(lags), chunk)]
    return np.concatenate(out) if out else np.zeros((0, N_TARGETS))


def mse_loss(preds: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error over samples and both output components."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.size == 0:
        raise ValueError("mse_loss of an empty batch is undefined")
    if preds.shape != targets.shape:
        raise ValueError(f"prediction shape {preds.shape} != target shape {targets.shape}")
    return float(np.mean((preds - targets) ** 2))


def backward(tape: ForwardTape, targets: np.ndarray, p: ModelParams, v: ModelVariant) -> np.ndarray:
    """Flattened gradient of the batch MSE, aligned with ``ModelParams.flatten``."""
    targets = np.asarray(targets, dtype=np.float64).reshape(tape.pred.shape)
    batch = tape.pred.shape[0]
    dpred = 2.0 * (tape.pred - targets) / tape.pred.size
    dz = dpred * tape.pred * (1.0 - tape.pred)
    g_head_W = outer_sum(dz, tape.head_in)
    g_head_b = batch_sum(dz)
    d_head_in = dz @ p.head_W

    d_hiddens = np.zeros_like(tape.hiddens)
    mid: list[np.ndarray] = []
    if v.kind == "alstm":
        g_attn, dh_att, d_query = attention_backward(tape.attn, d_head_in, p.attn)
        d_hiddens += dh_att
        mid = g_attn.tensors()
        if v.query == "last":
            d_hiddens[:, -1] += d_query
        else:
            mid.append(d_query.sum(axis=0))
    else:
        da = d_head_in * (1.0 - tape.proj_out**2)
        mid = [outer_sum(da, tape.hiddens[:, -1]), batch_sum(da)]
        d_hiddens[:, -1] += da @ p.proj_W

    lstm_grads = [np.zeros_like(t) for t in p.lstm.tensors()]
    dh_next = np.zeros((batch, v.hidden_size))
    dc_next = np.zeros((batch, v.hidden_size))
    for t in reversed(range(v.n_lags)):
        g, _, dh_next, dc_next = lstm_step_backward(tape.steps[t], d_hiddens[:, t] + dh_next, dc_next, p.lstm)
        for acc, gt in zip(lstm_grads, g.tensors()):
            acc += gt

    return np.concatenate([t.ravel() for t in lstm_grads + mid + [g_head_W, g_head_b]])


def loss_and_grad(
    flat: np.ndarray, lags: np.ndarray, exo: np.ndarray, targets: np.ndarray, v: ModelVariant
) -> tuple[float, np.ndarray]:
    p = unflatten(flat, v)
    pred, tape = forward(lags, exo, p, v)
    return mse_loss(pred, targets), backward(tape, targets, p, v)


# -- checkpoints ------------------------------------------------------------


def save_checkpoint(path: str | Path, p: ModelParams, v: ModelVariant, **meta) -> None:
    """Write a JSON checkpoint.

    Layout (version 1)::

        {"format": "alstm-traffic-checkpoint", "version": 1,
         "variant": {...ModelVariant fields...},
         "param_count": int,
         "meta": {seed, normalizer, dataset_hash, split, train_config, ...},
         "params": [float, ...]}       # flattened in the documented order

    Floats are written with ``repr`` precision so loading is bit-exact.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "variant": asdict(v),
        "param_count": param_count(p),
        "meta": meta,
        "params": p.flatten().tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, ModelVariant, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    v = ModelVariant(**doc["variant"])
    p = unflatten(np.array(doc["params"], dtype=np.float64), v)
    return p, v, doc["meta"]


def params_digest(p: ModelParams) -> str:
    return hashlib.sha256(p.flatten().tobytes()).hexdigest()

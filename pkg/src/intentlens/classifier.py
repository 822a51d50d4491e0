"""(Bi)LSTM multi-label intent classifier with hand-derived gradients.

A contract arrives as a matrix with one (highlighted) embedding per
function.  Rows are zero-padded or truncated to ``p`` timesteps; padded
steps are masked and leave the recurrent state untouched.  The final
forward state (and, when bidirectional, the final state of the reversed
pass) feeds a dense sigmoid layer with one output per intent category.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DivergenceError, EmptySequenceError, ShapeError
from .labels import NUM_LABELS
from .numerics import PARAM_DTYPE, AdamState, adam_step, bce_loss, glorot_uniform, sigmoid

log = logging.getLogger(__name__)

GATES = ("f", "u", "o", "theta")
RECURRENT_INIT = 0.05


@dataclass(frozen=True)
class ClassifierConfig:
    p: int = 256
    m: int = 512
    h: int = 64
    bidirectional: bool = True
    l: int = NUM_LABELS
    batch_size: int = 50
    epochs: int = 100
    threshold: float = 0.5
    lr: float = 1e-3
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("p", "m", "h", "l", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierConfig":
        return cls(**data)


def _directions(bidirectional: bool) -> tuple[str, ...]:
    return ("fwd", "bwd") if bidirectional else ("fwd",)


def param_names(bidirectional: bool) -> list[str]:
    names = []
    for d in _directions(bidirectional):
        for kind in ("W", "U", "b"):
            names += [f"{d}.{kind}_{g}" for g in GATES]
    return names + ["dense.W", "dense.b"]


@dataclass
class ClassifierParams:
    """Trainable arrays keyed ``{fwd,bwd}.{W,U,b}_{f,u,o,theta}`` and ``dense.{W,b}``."""

    arrays: dict[str, np.ndarray]
    adam: AdamState | None = None

    @property
    def bidirectional(self) -> bool:
        return "bwd.W_f" in self.arrays

    @property
    def hidden(self) -> int:
        return self.arrays["fwd.U_f"].shape[0]

    @property
    def input_dim(self) -> int:
        return self.arrays["fwd.W_f"].shape[1]

    @property
    def labels(self) -> int:
        return self.arrays["dense.W"].shape[0]

    @classmethod
    def initialize(cls, config: ClassifierConfig) -> "ClassifierParams":
        rng = np.random.default_rng(config.rng_seed)
        h, m = config.h, config.m
        arrays: dict[str, np.ndarray] = {}
        for d in _directions(config.bidirectional):
            for g in GATES:
                arrays[f"{d}.W_{g}"] = glorot_uniform(rng, h, m)
            for g in GATES:
                arrays[f"{d}.U_{g}"] = rng.uniform(-RECURRENT_INIT, RECURRENT_INIT, (h, h)).astype(PARAM_DTYPE)
            for g in GATES:
                arrays[f"{d}.b_{g}"] = np.zeros(h, dtype=PARAM_DTYPE)
        width = h * len(_directions(config.bidirectional))
        arrays["dense.W"] = glorot_uniform(rng, config.l, width)
        arrays["dense.b"] = np.zeros(config.l, dtype=PARAM_DTYPE)
        return cls(arrays)

    def copy(self) -> "ClassifierParams":
        return ClassifierParams({k: v.copy() for k, v in self.arrays.items()})

    def check(self, config: ClassifierConfig) -> None:
        expected = {}
        width = config.h * len(_directions(config.bidirectional))
        for d in _directions(config.bidirectional):
            for g in GATES:
                expected[f"{d}.W_{g}"] = (config.h, config.m)
                expected[f"{d}.U_{g}"] = (config.h, config.h)
                expected[f"{d}.b_{g}"] = (config.h,)
        expected["dense.W"] = (config.l, width)
        expected["dense.b"] = (config.l,)
        if set(expected) != set(self.arrays):
            raise ShapeError("classifier parameter names do not match the configuration")
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {self.arrays[name].shape}")


# --------------------------------------------------------------------------
# forward pieces


def pad_and_mask(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad or truncate ``x`` to ``p`` rows; mask marks the real ones."""
    x = np.asarray(getattr(x, "rows", x), dtype=np.float64)
    n, m = x.shape
    if n < 1:
        raise EmptySequenceError("cannot pad an empty matrix")
    out = np.zeros((p, m), dtype=np.float64)
    keep = min(n, p)
    out[:keep] = x[:keep]
    mask = np.zeros(p, dtype=bool)
    mask[:keep] = True
    return out, mask


def _stacked(arrays: dict[str, np.ndarray], d: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w = np.concatenate([arrays[f"{d}.W_{g}"] for g in GATES]).astype(np.float64)
    u = np.concatenate([arrays[f"{d}.U_{g}"] for g in GATES]).astype(np.float64)
    b = np.concatenate([arrays[f"{d}.b_{g}"] for g in GATES]).astype(np.float64)
    return w, u, b


def _cell(x, h_prev, c_prev, w, u, b):
    hid = h_prev.shape[-1]
    z = x @ w.T + h_prev @ u.T + b
    gf = sigmoid(z[..., :hid])
    gu = sigmoid(z[..., hid:2 * hid])
    go = sigmoid(z[..., 2 * hid:3 * hid])
    cand = np.tanh(z[..., 3 * hid:])
    c = gf * c_prev + gu * cand
    tc = np.tanh(c)
    return go * tc, c, (gf, gu, go, cand, tc)


def lstm_cell(f_i, h_prev, theta_prev, params: ClassifierParams | dict, direction: str = "fwd", mask: bool = True):
    """One LSTM step; a masked step hands back the previous state unchanged."""
    arrays = params.arrays if isinstance(params, ClassifierParams) else params
    w, u, b = _stacked(arrays, direction)
    f_i = np.asarray(f_i, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    theta_prev = np.asarray(theta_prev, dtype=np.float64)
    if f_i.shape[-1] != w.shape[1] or h_prev.shape[-1] != u.shape[1] or theta_prev.shape != h_prev.shape:
        raise ShapeError(
            f"lstm_cell: input {f_i.shape}, state {h_prev.shape}/{theta_prev.shape} vs weights {w.shape}"
        )
    if not mask:
        return h_prev, theta_prev
    h, c, _ = _cell(f_i, h_prev, theta_prev, w, u, b)
    return h, c


def _run_direction(x, mask, arrays, d, reverse, keep):
    """Scan one direction over a batch ``x`` of shape ``(B, T, m)``."""
    w, u, b = _stacked(arrays, d)
    batch, steps, _ = x.shape
    hid = u.shape[1]
    h = np.zeros((batch, hid))
    c = np.zeros((batch, hid))
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    tape = []
    for t in order:
        mt = mask[:, t][:, None]
        h_new, c_new, acts = _cell(x[:, t], h, c, w, u, b)
        if keep:
            tape.append((t, h, c, acts))
        h = np.where(mt, h_new, h)
        c = np.where(mt, c_new, c)
    return h, ((w, u), tape)


def _encode(x, mask, arrays, keep=False):
    bidirectional = "bwd.W_f" in arrays
    hf, tf = _run_direction(x, mask, arrays, "fwd", False, keep)
    if not bidirectional:
        return hf, {"fwd": tf}
    hb, tb = _run_direction(x, mask, arrays, "bwd", True, keep)
    return np.concatenate([hf, hb], axis=-1), {"fwd": tf, "bwd": tb}


def bilstm_forward(xp: np.ndarray, mask: np.ndarray, params: ClassifierParams) -> np.ndarray:
    """Final state(s) for one padded sequence: ``h_fwd`` or ``h_fwd ++ h_bwd``."""
    xp = np.asarray(xp, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if xp.ndim != 2 or xp.shape[1] != params.input_dim or mask.shape != (xp.shape[0],):
        raise ShapeError(f"bilstm_forward: input {xp.shape} and mask {mask.shape} vs m={params.input_dim}")
    if not mask.any():
        raise EmptySequenceError("every timestep is masked")
    h, _ = _encode(xp[None], mask[None], params.arrays)
    return h[0]


def predict_probs(h: np.ndarray, params: ClassifierParams) -> np.ndarray:
    w = params.arrays["dense.W"].astype(np.float64)
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != w.shape[1]:
        raise ShapeError(f"predict_probs: state width {h.shape[-1]} vs dense input {w.shape[1]}")
    return sigmoid(h @ w.T + params.arrays["dense.b"])


def threshold_multihot(y: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(y) >= threshold).astype(np.int8)


# --------------------------------------------------------------------------
# batched training


def make_batch(matrices: Sequence[np.ndarray], p: int) -> tuple[np.ndarray, np.ndarray]:
    """Pad a batch to the longest member (capped at ``p``).

    Masked tail steps never touch the state, so padding to ``p`` itself
    would give the same outputs; this only saves time.
    """
    rows = [np.asarray(getattr(x, "rows", x), dtype=np.float64) for x in matrices]
    if any(len(r) == 0 for r in rows):
        raise EmptySequenceError("empty sequence in batch")
    steps = min(p, max(len(r) for r in rows))
    m = rows[0].shape[1]
    x = np.zeros((len(rows), steps, m))
    mask = np.zeros((len(rows), steps), dtype=bool)
    for i, r in enumerate(rows):
        if r.shape[1] != m:
            raise ShapeError(f"inconsistent feature width {r.shape[1]} vs {m}")
        keep = min(len(r), steps)
        x[i, :keep] = r[:keep]
        mask[i, :keep] = True
    return x, mask


def forward_batch(x: np.ndarray, mask: np.ndarray, params: ClassifierParams) -> np.ndarray:
    if x.shape[-1] != params.input_dim:
        raise ShapeError(f"input width {x.shape[-1]} vs m={params.input_dim}")
    h, _ = _encode(x, mask, params.arrays)
    return predict_probs(h, params)


def _direction_backward(dh, x, mask, weights, tape, d, grads, dx):
    w, u = weights
    hid = u.shape[1]
    dw = np.zeros_like(w)
    du = np.zeros_like(u)
    db = np.zeros(w.shape[0])
    dc = np.zeros_like(dh)
    for t, h_prev, c_prev, (gf, gu, go, cand, tc) in reversed(tape):
        mt = mask[:, t][:, None]
        dc_new = dc + dh * go * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc_new * c_prev * gf * (1.0 - gf),
                dc_new * cand * gu * (1.0 - gu),
                dh * tc * go * (1.0 - go),
                dc_new * gu * (1.0 - cand * cand),
            ],
            axis=-1,
        )
        dz = np.where(mt, dz, 0.0)
        dw += dz.T @ x[:, t]
        du += dz.T @ h_prev
        db += dz.sum(axis=0)
        if dx is not None:
            dx[:, t] += dz @ w
        dh = np.where(mt, dz @ u, dh)
        dc = np.where(mt, dc_new * gf, dc)
    for i, g in enumerate(GATES):
        sl = slice(i * hid, (i + 1) * hid)
        grads[f"{d}.W_{g}"] = dw[sl]
        grads[f"{d}.U_{g}"] = du[sl]
        grads[f"{d}.b_{g}"] = db[sl]


def loss_and_grads(
    x: np.ndarray,
    mask: np.ndarray,
    y: np.ndarray,
    params: ClassifierParams,
    need_input_grad: bool = False,
):
    """Mean BCE over batch and labels plus gradients for every array.

    Returns ``(loss, grads, probs, dx)``; ``dx`` is ``None`` unless asked for.
    """
    arrays = params.arrays
    y = np.asarray(y, dtype=np.float64)
    h, tapes = _encode(x, mask, arrays, keep=True)
    wc = arrays["dense.W"].astype(np.float64)
    probs = sigmoid(h @ wc.T + arrays["dense.b"])
    loss = bce_loss(probs, y)
    d_logits = (probs - y) / y.size
    grads = {"dense.W": d_logits.T @ h, "dense.b": d_logits.sum(axis=0)}
    dh = d_logits @ wc
    dx = np.zeros_like(x) if need_input_grad else None
    hid = params.hidden
    _direction_backward(dh[:, :hid], x, mask, *tapes["fwd"], "fwd", grads, dx)
    if "bwd" in tapes:
        _direction_backward(dh[:, hid:], x, mask, *tapes["bwd"], "bwd", grads, dx)
    return loss, grads, probs, dx


@dataclass
class TrainResult:
    params: ClassifierParams
    history: list[float] = field(default_factory=list)


EpochCallback = Callable[[int, ClassifierParams, float], None]


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def train(
    dataset: Sequence[tuple[np.ndarray, Iterable[int]]],
    config: ClassifierConfig,
    params: ClassifierParams | None = None,
    on_epoch: EpochCallback | None = None,
) -> TrainResult:
    """Mini-batch Adam on mean binary cross-entropy.

    The shuffle of epoch ``e`` depends only on ``(rng_seed, e)``, so equal
    seeds give bit-identical runs.
    """
    if not dataset:
        raise ValueError("training needs at least one sample")
    matrices = [np.asarray(getattr(x, "rows", x), dtype=np.float64) for x, _ in dataset]
    labels = np.asarray([list(y) for _, y in dataset], dtype=np.float64)
    if labels.shape[1] != config.l:
        raise ShapeError(f"labels have {labels.shape[1]} slots, config expects {config.l}")
    if any(x.shape[1] != config.m for x in matrices):
        raise ShapeError(f"every sample must have m={config.m} features")
    params = params if params is not None else ClassifierParams.initialize(config)
    params.check(config)
    state = params.adam or AdamState.for_params(params.arrays, lr=config.lr)
    params.adam = state
    history: list[float] = []
    for epoch in range(config.epochs):
        total = 0.0
        for b, idx in enumerate(epoch_batches(len(matrices), config.batch_size, config.rng_seed, epoch)):
            x, mask = make_batch([matrices[i] for i in idx], config.p)
            loss, grads, _, _ = loss_and_grads(x, mask, labels[idx], params)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
            adam_step(params.arrays, grads, state)
            total += loss * len(idx)
        history.append(total / len(matrices))
        log.debug("epoch %d loss %.6f", epoch, history[-1])
        if on_epoch is not None:
            on_epoch(epoch, params, history[-1])
    return TrainResult(params, history)


def predict_many(
    matrices: Sequence[np.ndarray], params: ClassifierParams, config: ClassifierConfig, batch_size: int = 64
) -> np.ndarray:
    """Probabilities for many contracts, batched for speed."""
    out = []
    for i in range(0, len(matrices), batch_size):
        x, mask = make_batch(matrices[i:i + batch_size], config.p)
        out.append(forward_batch(x, mask, params))
    return np.concatenate(out) if out else np.zeros((0, params.labels))


def detect(tree, encoder, kmeans, params: ClassifierParams, config: ClassifierConfig):
    """Full inference for one code tree: ``(multi-hot labels, probabilities)``."""
    from .encoder import embed_contract
    from .highlight import highlight_matrix

    x = embed_contract(tree, encoder).rows
    if kmeans is not None:
        x = highlight_matrix(x, kmeans)
    xp, mask = pad_and_mask(x, config.p)
    probs = predict_probs(bilstm_forward(xp, mask, params), params)
    return threshold_multihot(probs, config.threshold), probs

"""Small dense numeric kernel used by the encoder and the classifier.

Parameters live in ``float32`` arrays; every kernel here promotes to
``float64`` before accumulating so results do not depend on the storage
precision more than necessary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, MutableMapping

import numpy as np

from .errors import NumericFaultError, ShapeError

PARAM_DTYPE = np.float32
BCE_CLAMP = 1e-7


def _shape_error(op: str, a: np.ndarray, b: np.ndarray) -> ShapeError:
    return ShapeError(f"{op}: incompatible shapes {tuple(a.shape)} and {tuple(b.shape)}")


def matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    v = np.asarray(v)
    if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
        raise _shape_error("matvec", a, v)
    return a.astype(np.float64) @ v.astype(np.float64)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_error("matmul", a, b)
    return a.astype(np.float64) @ b.astype(np.float64)


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise _shape_error("hadamard", a, b)
    return a * b


def concat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Join along the last (feature) axis."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[:-1] != b.shape[:-1]:
        raise _shape_error("concat", a, b)
    return np.concatenate([a, b], axis=-1)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    # exp(-x) may overflow to inf for very negative x; 1/(1+inf) is still 0.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax(x: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max subtraction."""
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": tanh,
    "sigmoid": sigmoid,
}


def activation_grad(name: str, out: np.ndarray) -> np.ndarray:
    """Derivative of an activation expressed through its output."""
    if name == "tanh":
        return 1.0 - out * out
    if name == "sigmoid":
        return out * (1.0 - out)
    raise ValueError(f"unknown activation {name!r}")


def bce_loss(y_pred: np.ndarray, y_true: np.ndarray) -> float:
    """Mean binary cross-entropy over every element (labels, and batch if 2-D)."""
    y_pred = np.asarray(y_pred, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_pred.shape != y_true.shape:
        raise _shape_error("bce_loss", y_pred, y_true)
    p = np.clip(y_pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(np.mean(-(y_true * np.log(p) + (1.0 - y_true) * np.log1p(-p))))


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols)).astype(PARAM_DTYPE)


def check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericFaultError(f"non-finite values in {where}")


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **kwargs) -> "AdamState":
        state = cls(**kwargs)
        for name, p in params.items():
            state.m[name] = np.zeros(p.shape, dtype=PARAM_DTYPE)
            state.v[name] = np.zeros(p.shape, dtype=PARAM_DTYPE)
        return state


def adam_step(
    params: MutableMapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> tuple[MutableMapping[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied in place.

    Parameters absent from ``grads`` are left alone but ``t`` still advances.
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise _shape_error(f"adam_step[{name}]", params[name], g)
        if not np.all(np.isfinite(g)):
            raise NumericFaultError(f"non-finite gradient for {name}")
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for name, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        if name not in state.m:
            state.m[name] = np.zeros(g.shape, dtype=PARAM_DTYPE)
            state.v[name] = np.zeros(g.shape, dtype=PARAM_DTYPE)
        m = state.beta1 * state.m[name].astype(np.float64) + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name].astype(np.float64) + (1.0 - state.beta2) * g * g
        state.m[name] = m.astype(PARAM_DTYPE)
        state.v[name] = v.astype(PARAM_DTYPE)
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p = params[name]
        params[name] = (p.astype(np.float64) - update).astype(p.dtype)
    return params, state


def finite_diff_check(
    loss_fn: Callable[[Mapping[str, np.ndarray]], float],
    params: MutableMapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    h: float = 1e-4,
    samples: int = 50,
    seed: int = 0,
) -> float:
    """Compare analytic gradients against central differences.

    Up to ``samples`` coordinates are drawn from *each* parameter group.  The
    step is measured after writing it back into the array, so float32
    rounding of ``w +/- h`` does not bias the estimate.  Returns
    ``max |g_analytic - g_numeric| / max(1, |g_numeric|)``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(grads):
        arr = params[name]
        flat = arr.reshape(-1)
        g_flat = np.asarray(grads[name], dtype=np.float64).reshape(-1)
        count = min(samples, flat.size)
        for idx in rng.choice(flat.size, size=count, replace=False):
            orig = flat[idx]
            flat[idx] = orig + h
            hi = flat[idx]
            f_plus = loss_fn(params)
            flat[idx] = orig - h
            lo = flat[idx]
            f_minus = loss_fn(params)
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (float(hi) - float(lo))
            err = abs(g_flat[idx] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst

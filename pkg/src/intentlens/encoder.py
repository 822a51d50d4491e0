"""Deep averaging network (DAN) encoder for function snippets.

Each leaf is tokenised, its token vectors are averaged, pushed through a
stack of square feed-forward layers, and projected by a softmax layer into
an ``m``-dimensional embedding.  Token vectors come from a hashed bucket
table, so no vocabulary file is needed.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .cctree import CodeTree, FunctionLeaf, list_functions
from .errors import EmptyContractError, EmptyFunctionError, NumericFaultError
from .numerics import ACTIVATIONS, PARAM_DTYPE, activation_grad, softmax

DEFAULT_VOCAB = 8192
DEFAULT_DIM = 128
DEFAULT_LAYERS = 2
DEFAULT_OUT_DIM = 512
OUTPUT_MODES = ("softmax", "l2")

# Initialisation ranges (uniform, symmetric).  Chosen so that distinct
# snippets land at clearly different points of the simplex; see README.
WORD_INIT = 1.0
FF_GAIN = 1.5
SOFTMAX_INIT = 2.0

_RAW_TOKEN = re.compile(r"[A-Za-z0-9_$]+|[^\sA-Za-z0-9_$]")
_WORD_PART = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


def tokenize(text: str) -> list[str]:
    """Split a snippet into lowercase word pieces and single punctuation marks.

    >>> tokenize("function setFeeAddress(address)")
    ['function', 'set', 'fee', 'address', '(', 'address', ')']
    """
    tokens: list[str] = []
    for raw in _RAW_TOKEN.findall(text):
        if len(raw) == 1 and not (raw.isascii() and (raw.isalnum() or raw in "_$")):
            tokens.append(raw.lower())
            continue
        pieces = [p for chunk in re.split(r"[_$]+", raw) for p in _WORD_PART.findall(chunk)]
        if pieces:
            tokens.extend(p.lower() for p in pieces)
        else:
            tokens.append(raw[0])  # bare `_` placeholder and friends
    if not tokens:
        raise EmptyFunctionError("snippet contains no tokens")
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    bucket_count: int = DEFAULT_VOCAB
    seed: int = 0

    def __post_init__(self):
        if self.bucket_count < 1:
            raise ValueError("bucket_count must be positive")

    def bucket(self, token: str) -> int:
        return _bucket(token, self.bucket_count, self.seed & 0xFFFFFFFFFFFFFFFF)

    def buckets(self, tokens: Sequence[str]) -> np.ndarray:
        return np.fromiter((self.bucket(t) for t in tokens), dtype=np.int64, count=len(tokens))


@lru_cache(maxsize=1 << 16)
def _bucket(token: str, count: int, seed: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")).digest()
    return int.from_bytes(digest, "little") % count


@dataclass
class EncoderParams:
    """All DAN weights, stored ``float32`` in a flat name -> array dict.

    Keys: ``word_table`` (V x k), ``ff.{i}.W`` (k x k), ``ff.{i}.b`` (k),
    ``softmax.W`` (m x k), ``softmax.b`` (m).
    """

    arrays: dict[str, np.ndarray]
    vocab: Vocabulary
    activation: str = "tanh"
    output: str = "softmax"
    rng_seed: int = 0
    trainable: bool = False
    _layer_count: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output not in OUTPUT_MODES:
            raise ValueError(f"unknown output mode {self.output!r}")
        self._layer_count = sum(1 for key in self.arrays if key.startswith("ff.") and key.endswith(".W"))
        k = self.arrays["word_table"].shape[1]
        if self.arrays["word_table"].shape[0] != self.vocab.bucket_count:
            raise ValueError("word table rows must equal the vocabulary bucket count")
        for i in range(self._layer_count):
            if self.arrays[f"ff.{i}.W"].shape != (k, k) or self.arrays[f"ff.{i}.b"].shape != (k,):
                raise ValueError(f"feed-forward layer {i} must be {k}x{k}")
        ws = self.arrays["softmax.W"]
        if ws.ndim != 2 or ws.shape[1] != k or self.arrays["softmax.b"].shape != (ws.shape[0],):
            raise ValueError("softmax layer shape mismatch")

    @classmethod
    def initialize(
        cls,
        seed: int = 0,
        vocab_size: int = DEFAULT_VOCAB,
        dim: int = DEFAULT_DIM,
        layers: int = DEFAULT_LAYERS,
        out_dim: int = DEFAULT_OUT_DIM,
        activation: str = "tanh",
        output: str = "softmax",
    ) -> "EncoderParams":
        rng = np.random.default_rng(seed)
        arrays = {"word_table": rng.uniform(-WORD_INIT, WORD_INIT, (vocab_size, dim)).astype(PARAM_DTYPE)}
        limit = FF_GAIN * np.sqrt(6.0 / (2 * dim))
        for i in range(layers):
            arrays[f"ff.{i}.W"] = rng.uniform(-limit, limit, (dim, dim)).astype(PARAM_DTYPE)
            arrays[f"ff.{i}.b"] = np.zeros(dim, dtype=PARAM_DTYPE)
        arrays["softmax.W"] = rng.uniform(-SOFTMAX_INIT, SOFTMAX_INIT, (out_dim, dim)).astype(PARAM_DTYPE)
        arrays["softmax.b"] = np.zeros(out_dim, dtype=PARAM_DTYPE)
        return cls(arrays, Vocabulary(vocab_size, seed), activation, output, seed)

    @property
    def word_table(self) -> np.ndarray:
        return self.arrays["word_table"]

    @property
    def ff_layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.arrays[f"ff.{i}.W"], self.arrays[f"ff.{i}.b"]) for i in range(self._layer_count)]

    @property
    def softmax_layer(self) -> tuple[np.ndarray, np.ndarray]:
        return self.arrays["softmax.W"], self.arrays["softmax.b"]

    @property
    def dim(self) -> int:
        return self.word_table.shape[1]

    @property
    def out_dim(self) -> int:
        return self.arrays["softmax.W"].shape[0]

    def config(self) -> dict:
        return {
            "vocab_size": self.vocab.bucket_count,
            "hash_seed": self.vocab.seed,
            "dim": self.dim,
            "layers": self._layer_count,
            "out_dim": self.out_dim,
            "activation": self.activation,
            "output": self.output,
            "rng_seed": self.rng_seed,
            "trainable": self.trainable,
        }


@dataclass
class EmbeddingMatrix:
    rows: np.ndarray
    contract_id: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape


def average_tokens(tokens: Sequence[str], params: EncoderParams) -> np.ndarray:
    if len(tokens) == 0:
        raise EmptyFunctionError("cannot average an empty token list")
    rows = params.word_table[params.vocab.buckets(tokens)]
    return rows.astype(np.float64).mean(axis=0)


def _forward(f0: np.ndarray, params: EncoderParams, keep: bool = False):
    """Feed-forward + output layer on a batch ``(n, k)`` of averages."""
    act = ACTIVATIONS[params.activation]
    acts = [f0]
    x = f0
    for i, (w, b) in enumerate(params.ff_layers, start=1):
        x = act(x @ w.astype(np.float64).T + b)
        if not np.all(np.isfinite(x)):
            raise NumericFaultError(f"non-finite activation in feed-forward layer {i}")
        acts.append(x)
    ws, bs = params.softmax_layer
    logits = x @ ws.astype(np.float64).T + bs
    if not np.all(np.isfinite(logits)):
        raise NumericFaultError(f"non-finite logits in output layer {len(params.ff_layers) + 1}")
    if params.output == "softmax":
        out = softmax(logits)
    else:
        norm = np.linalg.norm(logits, axis=-1, keepdims=True)
        out = logits / np.where(norm > 0, norm, 1.0)
    return (out, acts) if keep else out


def dan_forward(f0: np.ndarray, params: EncoderParams) -> np.ndarray:
    f0 = np.asarray(f0, dtype=np.float64)
    if not np.all(np.isfinite(f0)):
        raise NumericFaultError("non-finite input to layer 0")
    return _forward(f0[None, :], params)[0]


def embed_function(leaf: FunctionLeaf | str, params: EncoderParams) -> np.ndarray:
    text = leaf.body if isinstance(leaf, FunctionLeaf) else leaf
    return dan_forward(average_tokens(tokenize(text), params), params)


def bucket_lists(tree: CodeTree, params: EncoderParams) -> list[np.ndarray]:
    return [params.vocab.buckets(tokenize(leaf.body)) for leaf in list_functions(tree)]


def embed_contract(tree: CodeTree, params: EncoderParams, contract_id: str = "") -> EmbeddingMatrix:
    """One embedding row per leaf, in traversal order."""
    leaves = list_functions(tree)
    if not leaves:
        raise EmptyContractError(f"contract {contract_id or '<unnamed>'} has no functions")
    f0 = np.stack([average_tokens(tokenize(leaf.body), params) for leaf in leaves])
    return EmbeddingMatrix(_forward(f0, params), contract_id)


# --- joint training support -------------------------------------------------


def forward_buckets(buckets: Sequence[np.ndarray], params: EncoderParams):
    """Embed pre-hashed leaves, keeping what :func:`backward_buckets` needs."""
    f0 = np.stack([params.word_table[b].astype(np.float64).mean(axis=0) for b in buckets])
    out, acts = _forward(f0, params, keep=True)
    return out, (buckets, acts, out)


def backward_buckets(cache, d_out: np.ndarray, params: EncoderParams) -> dict[str, np.ndarray]:
    """Gradients of a scalar w.r.t. every encoder array given ``d loss / d embedding``."""
    if params.output != "softmax":
        raise NotImplementedError("joint training supports the softmax output only")
    buckets, acts, out = cache
    grads: dict[str, np.ndarray] = {}
    d_logits = out * (d_out - np.sum(d_out * out, axis=-1, keepdims=True))
    ws, _ = params.softmax_layer
    x_top = acts[-1]
    grads["softmax.W"] = d_logits.T @ x_top
    grads["softmax.b"] = d_logits.sum(axis=0)
    dx = d_logits @ ws.astype(np.float64)
    for i in range(len(params.ff_layers) - 1, -1, -1):
        w, _ = params.ff_layers[i]
        dz = dx * activation_grad(params.activation, acts[i + 1])
        grads[f"ff.{i}.W"] = dz.T @ acts[i]
        grads[f"ff.{i}.b"] = dz.sum(axis=0)
        dx = dz @ w.astype(np.float64)
    table = np.zeros(params.word_table.shape, dtype=np.float64)
    for row, b in zip(dx, buckets):
        np.add.at(table, b, row / len(b))
    grads["word_table"] = table
    return grads

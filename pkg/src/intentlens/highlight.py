"""Cosine K-means intent highlighting.

Functions that recur across many contracts (library code, standard token
plumbing) sit close to a centroid; distinctive functions sit far from all
of them.  Rows whose distance to the nearest centroid reaches ``lam`` are
scaled by ``mu`` before classification.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cctree import CodeTree, iter_keys
from .errors import InsufficientDataError, NoCommonFunctionsError, ZeroVectorError
from .numerics import PARAM_DTYPE

log = logging.getLogger(__name__)

DEFAULT_RHO = 0.75
DEFAULT_MAX_ITER = 80
DEFAULT_LAMBDA = 0.21
DEFAULT_MU = 16.0
TWCV_TOL = 1e-6
DUPLICATE_TOL = 1e-9


@dataclass
class OccurrenceStats:
    subset_size: int
    table: dict[str, float]


def occurrence_rates(sample: Sequence[CodeTree]) -> OccurrenceStats:
    """Fraction of trees containing each canonical function key."""
    if not sample:
        raise ValueError("occurrence rates need at least one tree")
    counts: Counter[str] = Counter()
    for keys in iter_keys(sample):
        counts.update(keys)
    size = len(sample)
    return OccurrenceStats(size, {key: c / size for key, c in sorted(counts.items())})


def select_k(stats: OccurrenceStats, rho: float = DEFAULT_RHO) -> int:
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    k = sum(1 for rate in stats.table.values() if rate > rho)
    if k == 0:
        raise NoCommonFunctionsError(f"no function occurs in more than {rho:.0%} of the sample; pass k explicitly")
    return k


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVectorError("cosine similarity of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 1.0 - cosine_similarity(a, b)


def _distances(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Pairwise cosine distances, shape ``(len(data), len(centroids))``."""
    dn = np.linalg.norm(data, axis=1)
    cn = np.linalg.norm(centroids, axis=1)
    if np.any(dn == 0):
        raise ZeroVectorError("zero vector in data")
    if np.any(cn == 0):
        raise ZeroVectorError("zero centroid")
    sims = (data @ centroids.T) / np.outer(dn, cn)
    return 1.0 - np.clip(sims, -1.0, 1.0)


@dataclass
class KMeansModel:
    centroids: np.ndarray
    lam: float = DEFAULT_LAMBDA
    mu: float = DEFAULT_MU
    max_iter: int = DEFAULT_MAX_ITER
    rng_seed: int = 0
    initial_k: int | None = None
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.centroids = np.ascontiguousarray(self.centroids, dtype=PARAM_DTYPE)
        if self.centroids.ndim != 2 or len(self.centroids) == 0:
            raise ValueError("centroids must be a non-empty 2-D array")
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        # Values above the maximum cosine distance (2) switch highlighting off.
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.initial_k is None:
            self.initial_k = len(self.centroids)

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def with_highlight(self, lam: float | None = None, mu: float | None = None) -> "KMeansModel":
        return KMeansModel(
            self.centroids.copy(),
            self.lam if lam is None else lam,
            self.mu if mu is None else mu,
            self.max_iter,
            self.rng_seed,
            self.initial_k,
            list(self.history),
        )


def _assign(data: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = _distances(data, centroids)
    idx = np.argmin(d, axis=1)
    return idx, d[np.arange(len(data)), idx]


def _prune(centroids: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Drop empty clusters and all but the first of any identical centroids."""
    keep = [j for j in range(len(centroids)) if np.any(labels == j)]
    kept: list[int] = []
    for j in keep:
        if all(cosine_distance(centroids[j], centroids[i]) >= DUPLICATE_TOL for i in kept):
            kept.append(j)
    return centroids[kept]


def _initial_centroids(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen: list[np.ndarray] = []
    for idx in rng.permutation(len(data)):
        row = data[idx]
        if all(cosine_distance(row, c) >= DUPLICATE_TOL for c in chosen):
            chosen.append(row)
            if len(chosen) == k:
                break
    if len(chosen) < k:
        raise InsufficientDataError(f"only {len(chosen)} distinct points for k={k}")
    return np.stack(chosen)


def train_kmeans(
    data: np.ndarray,
    k: int,
    z: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    lam: float = DEFAULT_LAMBDA,
    mu: float = DEFAULT_MU,
) -> KMeansModel:
    """Lloyd iterations under cosine distance with arithmetic-mean centroids.

    ``history`` holds the total within-cluster variation of every accepted
    centroid set, starting with the initial one.  An update that would raise
    the objective is rejected and ends training, so the returned centroids
    are the best seen.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be 2-D")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(data):
        raise InsufficientDataError(f"k={k} exceeds the {len(data)} data points")
    if np.any(np.linalg.norm(data, axis=1) == 0):
        raise ZeroVectorError("k-means data contains a zero vector")
    rng = np.random.default_rng(seed)
    centroids = _initial_centroids(data, k, rng)
    labels, dist = _assign(data, centroids)
    current = float(dist.sum())
    history = [current]
    for it in range(z):
        new = centroids.copy()
        for j in range(len(centroids)):
            members = data[labels == j]
            if len(members):
                mean = members.mean(axis=0)
                if np.linalg.norm(mean) > 0:
                    new[j] = mean
        new = _prune(new, labels)
        new_labels, new_dist = _assign(data, new)
        value = float(new_dist.sum())
        if value > current + 1e-12:
            log.debug("k-means iteration %d raised TWCV %.9g -> %.9g; keeping previous centroids", it, current, value)
            break
        improvement = current - value
        centroids, labels, current = new, new_labels, value
        history.append(current)
        if improvement < TWCV_TOL:
            break
    centroids = _prune(centroids, labels)
    return KMeansModel(centroids, lam, mu, z, seed, initial_k=k, history=history)


def twcv(data: np.ndarray, model: KMeansModel | np.ndarray) -> float:
    """Sum of cosine distances from each point to its nearest centroid."""
    centroids = model.centroids if isinstance(model, KMeansModel) else np.asarray(model)
    _, dist = _assign(np.asarray(data, dtype=np.float64), centroids.astype(np.float64))
    return float(dist.sum())


def intent_strength(f: np.ndarray, model: KMeansModel) -> tuple[int, float]:
    """Nearest centroid index (lowest on ties) and its cosine distance."""
    f = np.asarray(f, dtype=np.float64)
    if np.linalg.norm(f) == 0:
        raise ZeroVectorError("intent strength of a zero vector")
    idx, dist = _assign(f[None, :], model.centroids.astype(np.float64))
    return int(idx[0]), float(dist[0])


def strengths(x: np.ndarray, model: KMeansModel) -> tuple[np.ndarray, np.ndarray]:
    return _assign(np.asarray(x, dtype=np.float64), model.centroids.astype(np.float64))


def highlight_mask(x: np.ndarray, model: KMeansModel) -> np.ndarray:
    _, dist = strengths(x, model)
    return dist >= model.lam


def highlight_matrix(x, model: KMeansModel) -> np.ndarray:
    """Scale rows whose nearest-centroid distance is at least ``lam`` by ``mu``.

    Unscaled rows are returned bit-identical.
    """
    rows = np.asarray(getattr(x, "rows", x), dtype=np.float64)
    out = rows.copy()
    mask = highlight_mask(rows, model)
    out[mask] *= model.mu
    return out

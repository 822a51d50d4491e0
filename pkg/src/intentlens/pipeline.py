"""End-to-end glue: records -> trees -> embeddings -> highlight -> classifier."""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from .bundle import ModelBundle
from .cctree import CodeTree, list_functions
from .classifier import (
    ClassifierConfig,
    ClassifierParams,
    TrainResult,
    detect,
    epoch_batches,
    loss_and_grads,
    make_batch,
    train,
)
from .dataset import DatasetRecord
from .encoder import EncoderParams, backward_buckets, bucket_lists, embed_contract, forward_buckets
from .errors import DivergenceError, IntentLensError
from .evaluation import MetricsReport, evaluate
from .highlight import KMeansModel, highlight_mask, highlight_matrix, occurrence_rates, select_k, train_kmeans
from .numerics import AdamState, adam_step

log = logging.getLogger(__name__)


def usable_trees(records: Sequence[DatasetRecord]) -> tuple[list[DatasetRecord], list[CodeTree]]:
    """Records whose source parses into a tree with at least one leaf."""
    kept, trees = [], []
    for rec in records:
        try:
            tree = rec.code_tree()
        except IntentLensError as exc:
            log.warning("skipping %s: %s", rec.address or "<record>", exc)
            continue
        if not list_functions(tree):
            log.warning("skipping %s: no functions", rec.address or "<record>")
            continue
        kept.append(rec)
        trees.append(tree)
    return kept, trees


def fit_highlighter(
    trees: Sequence[CodeTree],
    encoder: EncoderParams,
    rho: float = 0.75,
    z: int = 80,
    seed: int = 0,
    k: int | None = None,
    lam: float = 0.21,
    mu: float = 16.0,
    sample_size: int | None = None,
) -> KMeansModel:
    """Pick ``k`` from function occurrence rates on a sample, then cluster its embeddings."""
    subset = list(trees)
    if sample_size is not None and sample_size < len(subset):
        idx = np.sort(np.random.default_rng(seed).choice(len(subset), size=sample_size, replace=False))
        subset = [subset[i] for i in idx]
    if k is None:
        k = select_k(occurrence_rates(subset), rho)
    data = np.concatenate([embed_contract(t, encoder).rows for t in subset])
    model = train_kmeans(data, k, z, seed, lam, mu)
    log.info("k-means: k %d -> %d after %d iterations", k, model.k, len(model.history) - 1)
    return model


def highlighted(tree: CodeTree, encoder: EncoderParams, kmeans: KMeansModel | None) -> np.ndarray:
    x = embed_contract(tree, encoder).rows
    return x if kmeans is None else highlight_matrix(x, kmeans)


def fit_classifier(
    trees: Sequence[CodeTree],
    labels: Sequence[np.ndarray],
    encoder: EncoderParams,
    kmeans: KMeansModel | None,
    config: ClassifierConfig,
    on_epoch: Callable | None = None,
) -> TrainResult:
    if encoder.trainable:
        return train_joint(trees, labels, encoder, kmeans, config, on_epoch)
    matrices = [highlighted(t, encoder, kmeans) for t in trees]
    return train(list(zip(matrices, labels)), config, on_epoch=on_epoch)


def train_joint(
    trees: Sequence[CodeTree],
    labels: Sequence[np.ndarray],
    encoder: EncoderParams,
    kmeans: KMeansModel | None,
    config: ClassifierConfig,
    on_epoch: Callable | None = None,
) -> TrainResult:
    """Train classifier and encoder together (encoder arrays are updated in place).

    The highlight indicator is recomputed on the current embeddings each
    step and treated as a constant when differentiating.
    """
    params = ClassifierParams.initialize(config)
    clf_state = AdamState.for_params(params.arrays, lr=config.lr)
    enc_state = AdamState.for_params(encoder.arrays, lr=config.lr)
    params.adam = clf_state
    buckets = [bucket_lists(t, encoder) for t in trees]
    y_all = np.asarray(labels, dtype=np.float64)
    history: list[float] = []
    for epoch in range(config.epochs):
        total = 0.0
        for b, idx in enumerate(epoch_batches(len(trees), config.batch_size, config.rng_seed, epoch)):
            caches, mats, scales = [], [], []
            for i in idx:
                emb, cache = forward_buckets(buckets[i], encoder)
                scale = np.ones(len(emb))
                if kmeans is not None:
                    scale[highlight_mask(emb, kmeans)] = kmeans.mu
                caches.append(cache)
                scales.append(scale)
                mats.append(emb * scale[:, None])
            x, mask = make_batch(mats, config.p)
            loss, grads, _, dx = loss_and_grads(x, mask, y_all[idx], params, need_input_grad=True)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
            enc_grads: dict[str, np.ndarray] = {}
            for row, (cache, scale) in enumerate(zip(caches, scales)):
                d_emb = np.zeros((len(scale), encoder.out_dim))
                steps = min(len(scale), dx.shape[1])
                d_emb[:steps] = dx[row, :steps] * scale[:steps, None]
                for name, g in backward_buckets(cache, d_emb, encoder).items():
                    enc_grads[name] = enc_grads[name] + g if name in enc_grads else g
            adam_step(params.arrays, grads, clf_state)
            adam_step(encoder.arrays, enc_grads, enc_state)
            total += loss * len(idx)
        history.append(total / len(trees))
        if on_epoch is not None:
            on_epoch(epoch, params, history[-1])
    return TrainResult(params, history)


class Detector:
    """Inference over a complete bundle."""

    def __init__(self, bundle: ModelBundle):
        if bundle.classifier is None:
            raise ValueError("bundle has no trained classifier")
        self.bundle = bundle

    def detect(self, tree: CodeTree) -> tuple[np.ndarray, np.ndarray]:
        b = self.bundle
        return detect(tree, b.encoder, b.kmeans, b.classifier, b.config)

    def predict_record(self, record: DatasetRecord) -> np.ndarray:
        return self.detect(record.code_tree())[0]

    def evaluate(self, records: Sequence[DatasetRecord]) -> MetricsReport:
        return evaluate(records, self.predict_record)

"""Confusion counts, accuracy/precision/recall/F1 and evaluation trends."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyEvaluationError, IntentLensError, ShapeError
from .labels import INTENT_LABELS, NUM_LABELS

log = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass
class ConfusionCounts:
    tp: np.ndarray = field(default_factory=lambda: np.zeros(NUM_LABELS, dtype=np.int64))
    fp: np.ndarray = field(default_factory=lambda: np.zeros(NUM_LABELS, dtype=np.int64))
    fn: np.ndarray = field(default_factory=lambda: np.zeros(NUM_LABELS, dtype=np.int64))
    tn: np.ndarray = field(default_factory=lambda: np.zeros(NUM_LABELS, dtype=np.int64))

    @property
    def samples(self) -> int:
        return int(self.tp[0] + self.fp[0] + self.fn[0] + self.tn[0])

    def totals(self) -> tuple[int, int, int, int]:
        return int(self.tp.sum()), int(self.fp.sum()), int(self.fn.sum()), int(self.tn.sum())


def accumulate(pred: Sequence[int], truth: Sequence[int], counts: ConfusionCounts) -> ConfusionCounts:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != (NUM_LABELS,) or truth.shape != (NUM_LABELS,):
        raise ShapeError(f"label vectors must have {NUM_LABELS} slots, got {pred.shape} and {truth.shape}")
    counts.tp += pred & truth
    counts.fp += pred & ~truth
    counts.fn += ~pred & truth
    counts.tn += ~pred & ~truth
    return counts


def metrics_from(tp: int, fp: int, fn: int, tn: int) -> dict[str, float]:
    """Accuracy, precision, recall and F1; undefined ratios count as 0."""
    total = tp + fp + fn + tn
    if total == 0:
        raise EmptyEvaluationError("no predictions to score")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": (tp + tn) / total, "precision": precision, "recall": recall, "f1": f1}


@dataclass
class MetricsReport:
    samples: int
    micro: dict[str, float]
    macro: dict[str, float]
    per_label: dict[str, dict]
    skipped: int = 0
    trend: list[dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "skipped": self.skipped,
            "micro": self.micro,
            "macro": self.macro,
            "per_label": self.per_label,
            "trend": self.trend,
        }

    def trend_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", *METRIC_NAMES])
        for step, point in enumerate(self.trend, start=1):
            writer.writerow([step, *(repr(point[name]) for name in METRIC_NAMES)])
        return buf.getvalue()


def compute_metrics(counts: ConfusionCounts) -> MetricsReport:
    if counts.samples == 0:
        raise EmptyEvaluationError("no evaluated contracts")
    per_label = {}
    for j, name in enumerate(INTENT_LABELS):
        tp, fp, fn, tn = int(counts.tp[j]), int(counts.fp[j]), int(counts.fn[j]), int(counts.tn[j])
        per_label[name] = {"tp": tp, "fp": fp, "fn": fn, "tn": tn, **metrics_from(tp, fp, fn, tn)}
    macro = {m: float(np.mean([per_label[n][m] for n in INTENT_LABELS])) for m in METRIC_NAMES}
    return MetricsReport(counts.samples, metrics_from(*counts.totals()), macro, per_label)


def evaluate(
    dataset: Iterable,
    predict: Callable[[object], Sequence[int]],
    truth_of: Callable[[object], Sequence[int]] = lambda record: record.labels,
) -> MetricsReport:
    """Score ``predict`` over ``dataset`` in order, tracking micro metrics per step.

    Records whose prediction raises a pipeline error are logged, skipped and
    counted in ``skipped``.
    """
    counts = ConfusionCounts()
    trend: list[dict[str, float]] = []
    skipped = 0
    for i, record in enumerate(dataset):
        try:
            pred = predict(record)
        except IntentLensError as exc:
            log.warning("skipping record %d: %s", i, exc)
            skipped += 1
            continue
        accumulate(pred, truth_of(record), counts)
        trend.append(metrics_from(*counts.totals()))
    if counts.samples == 0:
        raise EmptyEvaluationError(f"no contract could be evaluated ({skipped} skipped)")
    report = compute_metrics(counts)
    report.skipped = skipped
    report.trend = trend
    return report


def label_distribution(labels: Iterable[Sequence[int]]) -> dict[str, float]:
    """Share (in percent) of each category among all positive label instances."""
    totals = np.zeros(NUM_LABELS, dtype=np.int64)
    rows = 0
    for vec in labels:
        totals += np.asarray(vec, dtype=np.int64)
        rows += 1
    if rows == 0:
        raise EmptyEvaluationError("label distribution of an empty dataset")
    positives = totals.sum()
    if positives == 0:
        return {name: 0.0 for name in INTENT_LABELS}
    return {name: 100.0 * float(c) / float(positives) for name, c in zip(INTENT_LABELS, totals)}

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from intentlens.errors import EmptyEvaluationError, IntentLensError
from intentlens.evaluation import (
    METRIC_NAMES,
    ConfusionCounts,
    accumulate,
    compute_metrics,
    evaluate,
    label_distribution,
    metrics_from,
)
from intentlens.labels import INTENT_LABELS

vec = st.lists(st.integers(0, 1), min_size=10, max_size=10)


class TestAccumulate:
    def test_all_hits(self):
        counts = accumulate([1] * 10, [1] * 10, ConfusionCounts())
        assert counts.totals() == (10, 0, 0, 0)

    def test_all_false_positives(self):
        counts = accumulate([1] * 10, [0] * 10, ConfusionCounts())
        assert counts.totals() == (0, 10, 0, 0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accumulate([1] * 9, [1] * 10, ConfusionCounts())

    @given(st.lists(st.tuples(vec, vec), min_size=1, max_size=30))
    def test_matches_brute_force(self, pairs):
        counts = ConfusionCounts()
        for pred, truth in pairs:
            accumulate(pred, truth, counts)
        assert counts.totals() == oracles.confusion(pairs)
        assert np.all(counts.tp + counts.fp + counts.fn + counts.tn == len(pairs))


class TestMetrics:
    def test_spot_value(self):
        m = metrics_from(tp=10, fp=2, fn=3, tn=85)
        assert m["accuracy"] == pytest.approx(0.95, abs=1e-5)
        assert m["precision"] == pytest.approx(0.83333, abs=1e-5)
        assert m["recall"] == pytest.approx(0.76923, abs=1e-5)
        assert m["f1"] == pytest.approx(0.8, abs=1e-5)

    def test_perfect(self):
        assert metrics_from(5, 0, 0, 3) == {name: 1.0 for name in METRIC_NAMES}

    def test_zero_division(self):
        m = metrics_from(0, 0, 4, 6)
        assert m["precision"] == 0.0 and m["recall"] == 0.0 and m["f1"] == 0.0

    def test_empty(self):
        with pytest.raises(EmptyEvaluationError):
            compute_metrics(ConfusionCounts())

    @given(st.lists(st.tuples(vec, vec), min_size=1, max_size=30))
    def test_report_against_oracle(self, pairs):
        counts = ConfusionCounts()
        for pred, truth in pairs:
            accumulate(pred, truth, counts)
        report = compute_metrics(counts)
        assert report.micro == oracles.metrics(*oracles.confusion(pairs))
        for j, name in enumerate(INTENT_LABELS):
            column = [([p[j]], [t[j]]) for p, t in pairs]
            expected = oracles.metrics(*oracles.confusion(column))
            assert {k: report.per_label[name][k] for k in METRIC_NAMES} == expected
        for v in [*report.micro.values(), *report.macro.values()]:
            assert 0.0 <= v <= 1.0


class TestEvaluate:
    @pytest.fixture
    def records(self, rng):
        return [rng.integers(0, 2, 10) for _ in range(8)]

    def test_perfect_predictor(self, records):
        report = evaluate(records, lambda r: r, truth_of=lambda r: r)
        assert all(point == {name: 1.0 for name in METRIC_NAMES} for point in report.trend)
        assert len(report.trend) == len(records)

    def test_all_zero_predictor(self, records):
        report = evaluate(records, lambda r: [0] * 10, truth_of=lambda r: r)
        assert report.micro["recall"] == 0.0

    def test_skips_pipeline_errors(self, records):
        def predict(r):
            if r is records[2]:
                raise IntentLensError("bad contract")
            return r

        report = evaluate(records, predict, truth_of=lambda r: r)
        assert report.skipped == 1 and report.samples == len(records) - 1

    def test_nothing_evaluable(self):
        def predict(_):
            raise IntentLensError("x")

        with pytest.raises(EmptyEvaluationError):
            evaluate([np.zeros(10)], predict, truth_of=lambda r: r)

    def test_trend_csv(self, records):
        text = evaluate(records, lambda r: r, truth_of=lambda r: r).trend_csv()
        lines = text.splitlines()
        assert lines[0] == "step,accuracy,precision,recall,f1"
        assert len(lines) == len(records) + 1


class TestLabelDistribution:
    def test_single_label(self):
        dist = label_distribution([np.eye(10, dtype=int)[3]])
        assert dist["Reflect"] == 100.0
        assert sum(dist.values()) == pytest.approx(100.0)

    def test_uniform(self):
        dist = label_distribution(np.eye(10, dtype=int))
        assert set(dist.values()) == {10.0}

    def test_sample_corpus_recount(self, sample_records):
        labels = [r.labels for r in sample_records]
        dist = label_distribution(labels)
        totals = np.sum(labels, axis=0)
        for name, count in zip(INTENT_LABELS, totals):
            assert dist[name] == pytest.approx(100.0 * count / totals.sum(), abs=1e-12)
        assert sum(dist.values()) == pytest.approx(100.0, abs=0.01)

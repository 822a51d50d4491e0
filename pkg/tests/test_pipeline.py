import numpy as np
import pytest

from intentlens.bundle import ModelBundle
from intentlens.classifier import ClassifierConfig
from intentlens.dataset import DatasetRecord
from intentlens.encoder import EncoderParams
from intentlens.pipeline import Detector, fit_classifier, fit_highlighter, train_joint, usable_trees


@pytest.fixture(scope="module")
def small_encoder():
    return EncoderParams.initialize(seed=2, vocab_size=512, dim=16, layers=2, out_dim=32)


class TestUsableTrees:
    def test_skips_broken_and_empty(self):
        recs = [
            DatasetRecord.from_dict({"source": "contract A { function f() public {} }", "labels": [0] * 10}),
            DatasetRecord.from_dict({"source": "contract B { function g() {", "labels": [0] * 10}),
            DatasetRecord.from_dict({"source": "contract C { uint x; }", "labels": [0] * 10}),
        ]
        kept, trees = usable_trees(recs)
        assert kept == recs[:1] and len(trees) == 1


class TestFitHighlighter:
    def test_k_from_occurrence_rates(self, sample_trees, small_encoder):
        model = fit_highlighter(sample_trees, small_encoder, seed=0)
        assert model.initial_k >= 5 and model.dim == 32

    def test_manual_k_and_subsample(self, sample_trees, small_encoder):
        model = fit_highlighter(sample_trees, small_encoder, seed=0, k=3, sample_size=10)
        assert model.initial_k == 3


class TestJointTraining:
    def test_updates_encoder_and_is_deterministic(self, sample_trees, sample_labels):
        def run():
            enc = EncoderParams.initialize(seed=2, vocab_size=512, dim=16, layers=2, out_dim=32)
            km = fit_highlighter(sample_trees, enc, seed=0)
            before = {k: v.copy() for k, v in enc.arrays.items()}
            enc.trainable = True
            cfg = ClassifierConfig(m=32, h=4, epochs=3, batch_size=10)
            result = fit_classifier(sample_trees, sample_labels, enc, km, cfg)
            return before, enc, result

        before, enc, result = run()
        assert len(result.history) == 3
        assert not np.array_equal(before["softmax.W"], enc.arrays["softmax.W"])
        assert not np.array_equal(before["word_table"], enc.arrays["word_table"])
        _, enc2, result2 = run()
        assert result.history == result2.history
        assert enc.arrays["ff.0.W"].tobytes() == enc2.arrays["ff.0.W"].tobytes()

    def test_loss_decreases(self, sample_trees, sample_labels):
        enc = EncoderParams.initialize(seed=2, vocab_size=512, dim=16, layers=2, out_dim=32)
        cfg = ClassifierConfig(m=32, h=8, epochs=30, batch_size=30)
        result = train_joint(sample_trees, sample_labels, enc, None, cfg)
        assert result.history[-1] < result.history[0]


class TestDetector:
    def test_requires_classifier(self, small_encoder):
        with pytest.raises(ValueError):
            Detector(ModelBundle(small_encoder))

    def test_evaluate_matches_detect(self, sample_records, sample_trees, sample_labels, small_encoder):
        km = fit_highlighter(sample_trees, small_encoder, seed=0)
        cfg = ClassifierConfig(m=32, h=4, epochs=2)
        result = fit_classifier(sample_trees, sample_labels, small_encoder, km, cfg)
        det = Detector(ModelBundle(small_encoder, km, result.params, cfg))
        report = det.evaluate(sample_records)
        assert report.samples == len(sample_records)
        preds = [det.detect(t)[0] for t in sample_trees]
        tp = sum(int(np.sum((p == 1) & (r.labels == 1))) for p, r in zip(preds, sample_records))
        assert sum(v["tp"] for v in report.per_label.values()) == tp

import numpy as np

from intentlens.cctree import list_functions
from intentlens.highlight import occurrence_rates, select_k
from intentlens.labels import INTENT_LABELS
from intentlens.sample import dump_jsonl, generate_sample_corpus, sample_corpus_path


class TestSampleCorpus:
    def test_bundled_file_matches_generator(self):
        assert sample_corpus_path().read_text(encoding="utf-8") == dump_jsonl(generate_sample_corpus())

    def test_every_label_is_represented(self, sample_records):
        counts = np.sum([r.labels for r in sample_records], axis=0)
        assert np.all(counts >= 3), dict(zip(INTENT_LABELS, counts))

    def test_first_contract_is_fee_and_reflect(self, sample_records):
        assert [INTENT_LABELS[i] for i in np.flatnonzero(sample_records[0].labels)] == ["Fee", "Reflect"]

    def test_shared_boilerplate_gives_common_functions(self, sample_trees):
        assert select_k(occurrence_rates(sample_trees)) >= 5
        assert all(len(list_functions(t)) >= 5 for t in sample_trees)

    def test_generator_is_deterministic(self):
        assert generate_sample_corpus(seed=4) == generate_sample_corpus(seed=4)

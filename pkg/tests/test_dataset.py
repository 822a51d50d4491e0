import json

import pytest

from intentlens.dataset import DatasetRecord, ingest
from intentlens.errors import DatasetError
from intentlens.sample import sample_corpus_path

GOOD = {"address": "0x1", "source": "contract A { function f() public {} }", "labels": [0] * 10}


def write_lines(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows))
    return path


class TestIngest:
    def test_sample_corpus(self):
        result = ingest(sample_corpus_path())
        assert len(result.records) == 30 and result.skipped == 0

    def test_empty_file(self, tmp_path):
        with pytest.raises(DatasetError):
            ingest(write_lines(tmp_path / "e.jsonl", []))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError):
            ingest(tmp_path / "absent.jsonl")

    def test_bad_lines_skipped_with_line_numbers(self, tmp_path):
        rows = [GOOD, {**GOOD, "labels": [0] * 9}, "{not json", {"address": "x", "labels": [0] * 10}, GOOD]
        result = ingest(write_lines(tmp_path / "d.jsonl", rows))
        assert len(result.records) == 2
        assert [line for line, _ in result.errors] == [2, 3, 4]
        assert "10" in result.errors[0][1]

    def test_labels_optional_when_asked(self, tmp_path):
        path = write_lines(tmp_path / "u.jsonl", [{"source": GOOD["source"]}])
        assert ingest(path, require_labels=False).records[0].labels is None
        with pytest.raises(DatasetError):
            ingest(path)


class TestRecord:
    def test_exactly_one_of_source_and_tree(self):
        tree = DatasetRecord.from_dict(GOOD).code_tree().to_dict()
        with pytest.raises(ValueError):
            DatasetRecord.from_dict({**GOOD, "tree": tree})
        rec = DatasetRecord.from_dict({"address": "0x1", "tree": tree, "labels": [0] * 10})
        assert rec.code_tree().to_dict() == tree

    def test_multi_file_source(self):
        rec = DatasetRecord.from_dict(
            {"source": [["a.sol", "contract A {}"], ["b.sol", "contract B { event E(); }"]], "labels": [0] * 10}
        )
        assert [c.name for c in rec.code_tree().contracts] == ["A", "B"]

    @pytest.mark.parametrize("labels", [[2] + [0] * 9, "0000000000", [0] * 11])
    def test_invalid_labels(self, labels):
        with pytest.raises(ValueError):
            DatasetRecord.from_dict({**GOOD, "labels": labels})

    def test_round_trip(self):
        rec = DatasetRecord.from_dict(GOOD)
        assert DatasetRecord.from_dict(rec.to_dict()).to_dict() == rec.to_dict()
        with_tree = DatasetRecord.from_dict(rec.to_dict(with_tree=True))
        assert with_tree.code_tree() == rec.code_tree()

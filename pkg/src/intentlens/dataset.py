"""JSONL corpus ingestion.

One record per line::

    {"address": "0x..", "source": "<solidity>", "labels": [0, 1, ...]}

``source`` may also be a list of ``[filename, text]`` pairs for multi-file
contracts, and may be replaced by ``tree`` holding a serialized code tree.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cctree import CodeTree, SourceDocument, extract_tree
from .errors import DatasetError
from .labels import NUM_LABELS, label_vector

log = logging.getLogger(__name__)


@dataclass
class DatasetRecord:
    address: str
    source: SourceDocument | None = None
    tree: CodeTree | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        if (self.source is None) == (self.tree is None):
            raise ValueError("a record holds exactly one of source or tree")

    def code_tree(self) -> CodeTree:
        """The record's tree, extracting it from source on first use."""
        if self.tree is None:
            self.tree = extract_tree(self.source)
        return self.tree

    @classmethod
    def from_dict(cls, data: dict, require_labels: bool = True) -> "DatasetRecord":
        if not isinstance(data, dict):
            raise ValueError("record must be a JSON object")
        address = str(data.get("address", ""))
        has_source, has_tree = "source" in data, "tree" in data
        if has_source == has_tree:
            raise ValueError("record must contain exactly one of 'source' or 'tree'")
        source = tree = None
        if has_source:
            raw = data["source"]
            if isinstance(raw, str):
                source = SourceDocument.from_text(raw, filename=address or "<source>", address=address)
            elif isinstance(raw, list) and raw and all(isinstance(f, list) and len(f) == 2 for f in raw):
                source = SourceDocument(files=tuple((str(n), str(t)) for n, t in raw), address=address)
            else:
                raise ValueError("'source' must be a string or a non-empty list of [filename, text] pairs")
        else:
            tree = CodeTree.from_dict(data["tree"])
        labels = None
        if "labels" in data:
            raw_labels = data["labels"]
            if not isinstance(raw_labels, list) or len(raw_labels) != NUM_LABELS:
                got = len(raw_labels) if isinstance(raw_labels, list) else type(raw_labels).__name__
                raise ValueError(f"'labels' must be a list of {NUM_LABELS} ints, got {got}")
            labels = label_vector(raw_labels)
        elif require_labels:
            raise ValueError("record has no 'labels'")
        return cls(address, source, tree, labels)

    def to_dict(self, with_tree: bool = False) -> dict:
        out: dict = {"address": self.address}
        if with_tree or self.source is None:
            out["tree"] = self.code_tree().to_dict()
        elif len(self.source.files) == 1:
            out["source"] = self.source.files[0][1]
        else:
            out["source"] = [list(f) for f in self.source.files]
        if self.labels is not None:
            out["labels"] = [int(v) for v in self.labels]
        return out


@dataclass
class IngestResult:
    records: list[DatasetRecord]
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return len(self.errors)


def ingest(path: str | Path, require_labels: bool = True) -> IngestResult:
    """Parse a JSONL corpus, skipping (and reporting) malformed lines."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    records: list[DatasetRecord] = []
    errors: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(DatasetRecord.from_dict(json.loads(line), require_labels))
        except (ValueError, TypeError) as exc:
            errors.append((lineno, str(exc)))
            log.warning("%s:%d: skipped: %s", path, lineno, exc)
    if not records:
        raise DatasetError(f"{path}: no valid records ({len(errors)} malformed lines)")
    return IngestResult(records, errors)

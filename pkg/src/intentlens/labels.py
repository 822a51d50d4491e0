"""The ten intent categories and multi-hot label vectors."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

INTENT_LABELS: tuple[str, ...] = (
    "Fee",
    "DisableTrading",
    "Blacklist",
    "Reflect",
    "MaxTX",
    "Mint",
    "Honeypot",
    "Reward",
    "Rebase",
    "MaxSell",
)
NUM_LABELS = len(INTENT_LABELS)


def label_vector(values: Iterable[int]) -> np.ndarray:
    """Validate and pack a 10-slot multi-hot vector as ``int8``."""
    vec = np.asarray(list(values), dtype=np.int64)
    if vec.shape != (NUM_LABELS,):
        raise ValueError(f"label vector must have {NUM_LABELS} slots, got {vec.size}")
    if not np.isin(vec, (0, 1)).all():
        raise ValueError("label slots must be 0 or 1")
    return vec.astype(np.int8)


def from_names(names: Iterable[str]) -> np.ndarray:
    vec = np.zeros(NUM_LABELS, dtype=np.int8)
    for name in names:
        vec[INTENT_LABELS.index(name)] = 1
    return vec


def to_names(vec: Sequence[int]) -> list[str]:
    return [name for name, bit in zip(INTENT_LABELS, vec) if bit]

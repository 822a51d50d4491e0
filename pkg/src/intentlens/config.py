"""Run configuration: CLI flags > config file > INTENTLENS_SEED > built-in defaults."""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SEED_ENV = "INTENTLENS_SEED"

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    # encoder
    "vocab": 8192,
    "embed_dim": 128,
    "layers": 2,
    "dim": 512,
    "activation": "tanh",
    "output": "softmax",
    "train_encoder": False,
    # highlight
    "rho": 0.75,
    "z": 80,
    "k": None,
    "sample_size": None,
    "lambda": 0.21,
    "mu": 16.0,
    # classifier
    "p": 256,
    "hidden": 64,
    "bidirectional": True,
    "epochs": 100,
    "batch": 50,
    "lr": 1e-3,
    "threshold": 0.5,
}


def load_config_file(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve(flags: Mapping[str, Any], file_cfg: Mapping[str, Any]) -> dict[str, Any]:
    """Merge the layers; ``None`` in ``flags`` means "not given"."""
    out = dict(DEFAULTS)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        out["seed"] = int(env_seed)
    out.update(file_cfg)
    out.update({k: v for k, v in flags.items() if v is not None and k in DEFAULTS})
    return out

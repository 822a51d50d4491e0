"""Versioned single-file model bundle.

The bundle is one JSON document.  Arrays are stored as
``{"dtype": "float32", "shape": [...], "data": <base64 little-endian>}`` so
weights round-trip bit-exactly while the header stays readable.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import ClassifierConfig, ClassifierParams
from .encoder import EncoderParams, Vocabulary
from .errors import BundleConsistencyError, CorruptBundleError, UnsupportedVersionError
from .highlight import KMeansModel
from .numerics import AdamState

FORMAT_VERSION = "1"


@dataclass
class ModelBundle:
    encoder: EncoderParams
    kmeans: KMeansModel | None = None
    classifier: ClassifierParams | None = None
    config: ClassifierConfig | None = None
    metadata: dict = field(default_factory=dict)

    def check(self) -> None:
        m = self.encoder.out_dim
        if self.kmeans is not None and self.kmeans.dim != m:
            raise BundleConsistencyError(f"encoder emits m={m} but centroids have dimension {self.kmeans.dim}")
        if (self.classifier is None) != (self.config is None):
            raise BundleConsistencyError("classifier parameters and configuration must travel together")
        if self.config is not None:
            if self.config.m != m:
                raise BundleConsistencyError(f"encoder emits m={m} but the classifier expects m={self.config.m}")
            self.classifier.check(self.config)


def encode_array(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    dtype = arr.dtype.newbyteorder("<")
    return {
        "dtype": arr.dtype.name,
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype=dtype).tobytes()).decode("ascii"),
    }


def decode_array(obj: dict) -> np.ndarray:
    try:
        dtype = np.dtype(obj["dtype"]).newbyteorder("<")
        shape = tuple(int(s) for s in obj["shape"])
        raw = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptBundleError(f"bad array record: {exc}") from exc
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(raw) != expected:
        raise CorruptBundleError(f"array payload has {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))


def _arrays_out(arrays: dict[str, np.ndarray]) -> dict:
    return {name: encode_array(arr) for name, arr in sorted(arrays.items())}


def _arrays_in(obj: dict) -> dict[str, np.ndarray]:
    return {name: decode_array(rec) for name, rec in obj.items()}


def default_metadata(**seeds) -> dict:
    # Wall-clock stamps would break byte-identical rebuilds; honour
    # SOURCE_DATE_EPOCH when the caller wants one.
    stamp = os.environ.get("SOURCE_DATE_EPOCH")
    return {"tool": f"intentlens {__version__}", "created_at": int(stamp) if stamp else None, "seeds": seeds}


def bundle_to_dict(bundle: ModelBundle) -> dict:
    bundle.check()
    enc = bundle.encoder
    doc: dict = {
        "version": FORMAT_VERSION,
        "metadata": bundle.metadata,
        "encoder": {"config": enc.config(), "arrays": _arrays_out(enc.arrays)},
        "kmeans": None,
        "classifier": None,
    }
    if bundle.kmeans is not None:
        km = bundle.kmeans
        doc["kmeans"] = {
            "k": km.k,
            "initial_k": km.initial_k,
            "lambda": km.lam,
            "mu": km.mu,
            "max_iter": km.max_iter,
            "seed": km.rng_seed,
            "history": km.history,
            "centroids": encode_array(km.centroids),
        }
    if bundle.classifier is not None:
        clf: dict = {"config": bundle.config.to_dict(), "arrays": _arrays_out(bundle.classifier.arrays), "adam": None}
        adam = bundle.classifier.adam
        if adam is not None:
            clf["adam"] = {
                "lr": adam.lr,
                "beta1": adam.beta1,
                "beta2": adam.beta2,
                "eps": adam.eps,
                "t": adam.t,
                "m": _arrays_out(adam.m),
                "v": _arrays_out(adam.v),
            }
        doc["classifier"] = clf
    return doc


def bundle_from_dict(doc: dict) -> ModelBundle:
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptBundleError("not a model bundle")
    if doc["version"] != FORMAT_VERSION:
        raise UnsupportedVersionError(f"bundle version {doc['version']!r} is not supported (expected {FORMAT_VERSION!r})")
    try:
        ecfg = doc["encoder"]["config"]
        encoder = EncoderParams(
            _arrays_in(doc["encoder"]["arrays"]),
            Vocabulary(ecfg["vocab_size"], ecfg["hash_seed"]),
            ecfg["activation"],
            ecfg["output"],
            ecfg["rng_seed"],
            ecfg.get("trainable", False),
        )
        kmeans = None
        if doc.get("kmeans") is not None:
            km = doc["kmeans"]
            kmeans = KMeansModel(
                decode_array(km["centroids"]),
                lam=km["lambda"],
                mu=km["mu"],
                max_iter=km["max_iter"],
                rng_seed=km["seed"],
                initial_k=km["initial_k"],
                history=list(km["history"]),
            )
        classifier = config = None
        if doc.get("classifier") is not None:
            clf = doc["classifier"]
            config = ClassifierConfig.from_dict(clf["config"])
            classifier = ClassifierParams(_arrays_in(clf["arrays"]))
            if clf.get("adam") is not None:
                a = clf["adam"]
                classifier.adam = AdamState(
                    a["lr"], a["beta1"], a["beta2"], a["eps"], a["t"], _arrays_in(a["m"]), _arrays_in(a["v"])
                )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorruptBundleError):
            raise
        raise CorruptBundleError(f"malformed bundle: {exc}") from exc
    bundle = ModelBundle(encoder, kmeans, classifier, config, dict(doc.get("metadata") or {}))
    bundle.check()
    return bundle


def dumps(bundle: ModelBundle) -> bytes:
    return (json.dumps(bundle_to_dict(bundle), sort_keys=True, indent=1) + "\n").encode("utf-8")


def save_model(bundle: ModelBundle, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(dumps(bundle))
    return path


def load_model(path: str | Path) -> ModelBundle:
    path = Path(path)
    try:
        doc = json.loads(path.read_bytes().decode("utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        raise CorruptBundleError(f"cannot parse {path}: {exc}") from exc
    return bundle_from_dict(doc)

"""``intentlens`` command line.

Every subcommand exits 0 on success.  Failures print one JSON line
``{"error": <kind>, "message": <text>}`` to stderr and exit 1; argparse
usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bundle import ModelBundle, default_metadata, encode_array, load_model, save_model
from .cctree import SourceDocument, extract_tree
from .classifier import ClassifierConfig
from .config import load_config_file, resolve
from .dataset import DatasetRecord, ingest
from .encoder import EncoderParams, embed_contract
from .errors import IntentLensError
from .evaluation import label_distribution
from .highlight import highlight_mask, strengths
from .labels import INTENT_LABELS
from .pipeline import Detector, fit_classifier, fit_highlighter, usable_trees

log = logging.getLogger("intentlens")


def _dump(obj: Any, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _dump_lines(rows: Sequence[Any], out: str | None) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read_inputs(paths: Sequence[str]) -> tuple[list[DatasetRecord], bool]:
    """``.jsonl`` files yield their records; ``.sol`` files form one multi-file document."""
    jsonl = [p for p in paths if p.endswith(".jsonl")]
    sol = [p for p in paths if not p.endswith(".jsonl")]
    if jsonl and sol:
        raise ValueError("--in takes either .sol files or .jsonl corpora, not both")
    if jsonl:
        records: list[DatasetRecord] = []
        for p in jsonl:
            records.extend(ingest(p, require_labels=False).records)
        return records, True
    files = tuple((p, Path(p).read_text(encoding="utf-8")) for p in sol)
    return [DatasetRecord(Path(sol[0]).stem, source=SourceDocument(files, Path(sol[0]).stem))], False


def _settings(args: argparse.Namespace) -> dict[str, Any]:
    return resolve(vars(args), load_config_file(args.config))


def _classifier_config(cfg: dict[str, Any], m: int) -> ClassifierConfig:
    return ClassifierConfig(
        p=cfg["p"],
        m=m,
        h=cfg["hidden"],
        bidirectional=cfg["bidirectional"],
        batch_size=cfg["batch"],
        epochs=cfg["epochs"],
        threshold=cfg["threshold"],
        lr=cfg["lr"],
        rng_seed=cfg["seed"],
    )


def _new_encoder(cfg: dict[str, Any]) -> EncoderParams:
    return EncoderParams.initialize(
        seed=cfg["seed"],
        vocab_size=cfg["vocab"],
        dim=cfg["embed_dim"],
        layers=cfg["layers"],
        out_dim=cfg["dim"],
        activation=cfg["activation"],
        output=cfg["output"],
    )


def _training_trees(path: str):
    result = ingest(path)
    records, trees = usable_trees(result.records)
    if not trees:
        raise IntentLensError(f"{path}: no record produced a usable code tree")
    return records, trees


def cmd_extract(args: argparse.Namespace) -> None:
    records, is_corpus = _read_inputs(args.inputs)
    if not is_corpus:
        _dump(records[0].code_tree().to_dict(), args.out)
        return
    _dump_lines([r.to_dict(with_tree=True) for r in records], args.out)


def _embedding_rows(records, bundle: ModelBundle, with_highlight: bool) -> list[dict]:
    out = []
    for rec in records:
        x = embed_contract(rec.code_tree(), bundle.encoder).rows
        row: dict[str, Any] = {"address": rec.address, "embedding": encode_array(x)}
        if with_highlight:
            if bundle.kmeans is None:
                raise IntentLensError("bundle has no k-means model")
            cluster, dist = strengths(x, bundle.kmeans)
            mask = highlight_mask(x, bundle.kmeans)
            row["cluster"] = [int(c) for c in cluster]
            row["distance"] = [float(d) for d in dist]
            row["highlighted"] = [bool(b) for b in mask]
            x = np.where(mask[:, None], x * bundle.kmeans.mu, x).astype(x.dtype)
            row["embedding"] = encode_array(x)
        out.append(row)
    return out


def cmd_embed(args: argparse.Namespace) -> None:
    records, _ = _read_inputs(args.inputs)
    _dump({"contracts": _embedding_rows(records, load_model(args.model), False)}, args.out)


def cmd_highlight(args: argparse.Namespace) -> None:
    records, _ = _read_inputs(args.inputs)
    _dump({"contracts": _embedding_rows(records, load_model(args.model), True)}, args.out)


def cmd_train_kmeans(args: argparse.Namespace) -> None:
    cfg = _settings(args)
    _, trees = _training_trees(args.data)
    encoder = load_model(args.model).encoder if args.model else _new_encoder(cfg)
    kmeans = fit_highlighter(
        trees,
        encoder,
        rho=cfg["rho"],
        z=cfg["z"],
        seed=cfg["seed"],
        k=cfg["k"],
        lam=cfg["lambda"],
        mu=cfg["mu"],
        sample_size=cfg["sample_size"],
    )
    bundle = ModelBundle(encoder, kmeans, metadata=default_metadata(kmeans=cfg["seed"], encoder=encoder.rng_seed))
    save_model(bundle, args.out)
    _dump({"k": kmeans.k, "initial_k": kmeans.initial_k, "twcv": kmeans.history, "out": args.out}, None)


def cmd_train(args: argparse.Namespace) -> None:
    cfg = _settings(args)
    records, trees = _training_trees(args.data)
    if args.model:
        base = load_model(args.model)
        encoder, kmeans = base.encoder, base.kmeans
    else:
        encoder = _new_encoder(cfg)
        kmeans = fit_highlighter(
            trees, encoder, rho=cfg["rho"], z=cfg["z"], seed=cfg["seed"], k=cfg["k"], sample_size=cfg["sample_size"]
        )
    if kmeans is not None:
        kmeans = kmeans.with_highlight(cfg["lambda"], cfg["mu"])
    encoder.trainable = bool(cfg["train_encoder"])
    config = _classifier_config(cfg, encoder.out_dim)
    result = fit_classifier(trees, [r.labels for r in records], encoder, kmeans, config)
    bundle = ModelBundle(
        encoder,
        kmeans,
        result.params,
        config,
        metadata=default_metadata(classifier=config.rng_seed, encoder=encoder.rng_seed),
    )
    save_model(bundle, args.out)
    _dump({"epochs": config.epochs, "final_loss": result.history[-1] if result.history else None, "out": args.out}, None)


def cmd_evaluate(args: argparse.Namespace) -> None:
    detector = Detector(load_model(args.model))
    report = detector.evaluate(ingest(args.data).records)
    if args.trend:
        Path(args.trend).write_text(report.trend_csv(), encoding="utf-8")
    _dump(report.to_dict(), args.out)


def cmd_predict(args: argparse.Namespace) -> None:
    detector = Detector(load_model(args.model))
    records, is_corpus = _read_inputs(args.inputs)
    rows = []
    for rec in records:
        labels, probs = detector.detect(rec.code_tree())
        rows.append({
            "address": rec.address,
            "probabilities": [float(p) for p in probs],
            "labels": [int(v) for v in labels],
            "intents": [name for name, v in zip(INTENT_LABELS, labels) if v],
        })
    if is_corpus:
        _dump_lines(rows, args.out)
    else:
        _dump(rows[0], args.out)


def cmd_stats(args: argparse.Namespace) -> None:
    result = ingest(args.data)
    labels = [r.labels for r in result.records]
    counts = np.sum(labels, axis=0)
    _dump(
        {
            "records": len(result.records),
            "skipped": result.skipped,
            "counts": {name: int(c) for name, c in zip(INTENT_LABELS, counts)},
            "percent": label_distribution(labels),
        },
        args.out,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intentlens", description="Development-intent detection for Solidity contracts.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        return p

    def inputs(p):
        p.add_argument("--in", dest="inputs", action="append", required=True, help=".sol file(s) or a .jsonl corpus")

    def seeded(p):
        p.add_argument("--config", help="TOML file with default settings")
        p.add_argument("--seed", type=int)

    p = add("extract", cmd_extract, "build code trees")
    inputs(p)
    p.add_argument("--out")

    for name, func in (("embed", cmd_embed), ("highlight", cmd_highlight)):
        p = add(name, func, f"{name} function embeddings")
        p.add_argument("--model", required=True)
        inputs(p)
        p.add_argument("--out")

    p = add("train-kmeans", cmd_train_kmeans, "fit the intent highlighter")
    p.add_argument("--data", required=True)
    p.add_argument("--model", help="reuse this bundle's encoder")
    seeded(p)
    p.add_argument("--rho", type=float)
    p.add_argument("--z", type=int)
    p.add_argument("--k", type=int, help="override the occurrence-rate choice of k")
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--dim", type=int, help="encoder output dimension")
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train the classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--model", help="start from this bundle's encoder and k-means")
    seeded(p)
    p.add_argument("--mu", type=float)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--bidirectional", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--p", type=int, help="maximum functions per contract")
    p.add_argument("--dim", type=int, help="encoder output dimension (new encoder only)")
    p.add_argument("--rho", type=float)
    p.add_argument("--z", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.add_argument("--train-encoder", dest="train_encoder", action="store_true", default=None)
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "score a labelled corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--trend", help="write per-contract running metrics as CSV")
    p.add_argument("--out")

    p = add("predict", cmd_predict, "detect intents")
    p.add_argument("--model", required=True)
    inputs(p)
    p.add_argument("--out")

    p = add("stats", cmd_stats, "label distribution of a corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    return parser


def _error_kind(exc: BaseException) -> str:
    if isinstance(exc, IntentLensError):
        return exc.kind
    if isinstance(exc, OSError):
        return "io"
    return "invalid-input"


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (IntentLensError, OSError, ValueError) as exc:
        sys.stderr.write(json.dumps({"error": _error_kind(exc), "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``prepare``, ``train``, ``eval``, ``ablate``, ``stats``.

Settings resolve as flag > ``--config`` file (flat ``key=value``) > dataset preset.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time

import numpy as np

from . import ingest
from .evaluation import SWEEPS, run_ablation, write_report
from .graph import build_interaction_graph, build_kg, save_graph_cache
from .model import (
    POSITIVE_THRESHOLD, PRESETS, Hyperparams, Recommender, TrainingDiverged, evaluate_split,
    fit, load_checkpoint, save_checkpoint,
)
from .stats import analyse, load_reference_scores, read_score_matrix

log = logging.getLogger("dekgci")

EXIT_INPUT = 2
EXIT_DIVERGED = 3

HYPER_FLAGS = {
    "batchsize": int, "dim": int, "lr": float, "layers": int, "n_neighbor": int,
    "aggregator": str, "variant": str, "depth": int, "epochs": int, "patience": int,
    "seed": int, "weight_decay": float, "leaky_slope": float,
}


class InputError(Exception):
    pass


def _add_common(p):
    p.add_argument("--dataset", choices=sorted(PRESETS), help="benchmark preset (hyperparameter defaults and data subdirectory)")
    p.add_argument("--ratings", help="ratings file (user item rating)")
    p.add_argument("--kg", help="KG triple file (head relation tail)")
    p.add_argument("--item2entity", help="optional item -> entity alignment file")
    p.add_argument("--threshold", type=float, help="rating threshold for positives")
    p.add_argument("--header", action="store_true", help="ratings file has a header row")
    p.add_argument("--out", required=True, help="run directory; all outputs go here")
    p.add_argument("--config", help="flat key=value file of hyperparameters")
    p.add_argument("--seed", type=int)
    p.add_argument("--batchsize", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--layers", type=int)
    p.add_argument("--n-neighbor", dest="n_neighbor", type=int)
    p.add_argument("--aggregator", choices=["sum", "concat", "neighbor"])
    p.add_argument("--variant", choices=["dekgci", "ngcf", "lightgcn"])
    p.add_argument("--depth", type=int, help="KG receptive-field depth")
    p.add_argument("--epochs", type=int, help="maximum epochs")
    p.add_argument("--patience", type=int, help="early-stopping patience on eval AUC")
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--leaky-slope", dest="leaky_slope", type=float)
    p.add_argument("--workers", type=int, default=1, help="parallel sweep points")


def build_parser():
    parser = argparse.ArgumentParser(prog="dekgci", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build split manifests, stats and graph cache")
    _add_common(p)
    p = sub.add_parser("train", help="train and write a checkpoint plus epoch log")
    _add_common(p)
    p = sub.add_parser("eval", help="AUC/ACC of a checkpoint on one split")
    _add_common(p)
    p.add_argument("--checkpoint", help="defaults to <out>/checkpoint.npz")
    p.add_argument("--split", choices=["train", "eval", "test"], default="test")
    p = sub.add_parser("ablate", help="sweep one factor and report test metrics per point")
    p.add_argument("kind", choices=sorted(SWEEPS))
    _add_common(p)
    p = sub.add_parser("stats", help="Friedman, Iman-Davenport and Holm over a score table")
    p.add_argument("matrix", nargs="?", help="headered TSV; defaults to the bundled CTR score table")
    p.add_argument("--out", help="directory for stats.txt")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--control", help="control algorithm (default: best average rank)")
    return parser


def read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in HYPER_FLAGS:
                raise InputError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = HYPER_FLAGS[key](value)
    return values


def resolve_hyper(args):
    base = PRESETS.get(args.dataset, Hyperparams())
    merged = dataclasses.asdict(base)
    layered = read_config(args.config) if args.config else {}
    for key in HYPER_FLAGS:
        flag = getattr(args, key, None)
        if flag is not None:
            layered[key] = flag
    if "epochs" in layered:
        layered["max_epochs"] = layered.pop("epochs")
    merged.update(layered)
    try:
        return Hyperparams(**merged)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def data_paths(args):
    root = os.environ.get("DEKGCI_DATA_DIR")
    default_dir = os.path.join(root, args.dataset) if root and args.dataset else None

    def pick(explicit, name):
        if explicit:
            return explicit
        if default_dir:
            return os.path.join(default_dir, name)
        return None

    ratings = pick(args.ratings, "ratings.tsv")
    kg = pick(args.kg, "kg.tsv")
    item2entity = pick(args.item2entity, "item2entity.tsv")
    if ratings is None or kg is None:
        raise InputError("give --ratings and --kg, or --dataset with DEKGCI_DATA_DIR set")
    for p in (ratings, kg):
        if not os.path.isfile(p):
            raise InputError(f"missing input file: {p}")
    if item2entity and not os.path.isfile(item2entity):
        if args.item2entity:
            raise InputError(f"missing input file: {item2entity}")
        item2entity = None
    return ratings, kg, item2entity


def _prepared(out):
    return os.path.isfile(os.path.join(out, "dataset.npz"))


def cmd_prepare(args):
    ratings, kg_path, item2entity = data_paths(args)
    hyper = resolve_hyper(args)
    threshold = args.threshold
    if threshold is None and args.dataset:
        threshold = POSITIVE_THRESHOLD[args.dataset]
    try:
        dataset = ingest.prepare(ratings, kg_path, item2entity, threshold, hyper.seed,
                                 header=args.header)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    digest = ingest.file_digest(ratings, kg_path, item2entity)
    meta = {
        "dataset_hash": digest,
        "seed": hyper.seed,
        "positive_threshold": threshold,
        "negative_sampling": "1:1 per user, uniform over unobserved items, fixed once",
        "split_sha256": ingest.split_digest(dataset.split),
    }
    ingest.save_prepared(args.out, dataset, meta)
    train = dataset.split.train
    graph = build_interaction_graph(train[train[:, 2] == 1], dataset.n_users, dataset.n_items)
    kg = build_kg(dataset.kg.triples, dataset.kg.entity_count, dataset.kg.relation_count)
    save_graph_cache(os.path.join(args.out, "graph_cache.npz"), graph, kg, digest, hyper.seed)
    print(dataset.stats.summary())
    print("split sizes (train/eval/test):", *dataset.split.sizes())
    return dataset


def _load_or_prepare(args):
    if _prepared(args.out) and not (args.ratings or args.kg):
        return ingest.load_prepared(args.out)
    return cmd_prepare(args)


def run_metadata(hyper, args):
    return {
        "seed": hyper.seed,
        "variant": hyper.variant,
        "aggregator": hyper.aggregator,
        "kg_sampling": "without replacement when degree >= n_neighbor, otherwise with "
                       "replacement; isolated entities self-loop on relation 0; redrawn per batch",
        "attention_normaliser": "softmax over the sampled neighbour multiset",
        "dataset": args.dataset or "custom",
    }


def cmd_train(args):
    hyper = resolve_hyper(args)
    dataset = _load_or_prepare(args)
    model = Recommender.from_dataset(dataset, hyper)
    log_path = os.path.join(args.out, "train_log.tsv")
    rows = []

    def on_epoch(entry):
        rows.append(entry)
        print(f"epoch {entry['epoch']:3d}  loss {entry['loss']:.5f}  "
              f"eval auc {entry['eval_auc']:.4f}  acc {entry['eval_acc']:.4f}", flush=True)

    t0 = time.perf_counter()
    try:
        params, history = fit(model, dataset.split, hyper, on_epoch=on_epoch)
    finally:
        tmp = log_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("epoch\tloss\teval_auc\teval_acc\tseconds\n")
            for r in rows:
                fh.write(f"{r['epoch']}\t{r['loss']:.8f}\t{r['eval_auc']:.6f}\t"
                         f"{r['eval_acc']:.6f}\t{r['seconds']:.2f}\n")
        os.replace(tmp, log_path)
    best = max(history, key=lambda h: h["eval_auc"])
    meta = run_metadata(hyper, args)
    meta.update(best_epoch=best["epoch"], best_eval_auc=round(best["eval_auc"], 6),
                best_eval_acc=round(best["eval_acc"], 6))
    save_checkpoint(os.path.join(args.out, "checkpoint.npz"), params, hyper, meta)
    test = evaluate_split(model, params, dataset.split.test, "test", hyper.seed)
    report = {"metadata": meta, "hyperparameters": dataclasses.asdict(hyper),
              "test": dataclasses.asdict(test), "wall_seconds": time.perf_counter() - t0}
    write_report(os.path.join(args.out, "train_report.json"), report)
    print(f"test auc {test.auc:.4f}  acc {test.acc:.4f}")
    return report


def cmd_eval(args):
    path = args.checkpoint or os.path.join(args.out, "checkpoint.npz")
    if not os.path.isfile(path):
        raise InputError(f"missing checkpoint: {path}")
    if not _prepared(args.out):
        raise InputError(f"{args.out} holds no prepared dataset")
    params, hyper, meta = load_checkpoint(path)
    dataset = ingest.load_prepared(args.out)
    model = Recommender.from_dataset(dataset, hyper)
    expected = model.shapes()
    got = {k: v.shape for k, v in params.items()}
    if got != {k: tuple(s) for k, s in expected.items()}:
        raise InputError("checkpoint parameter shapes do not match the prepared dataset")
    report = evaluate_split(model, params, getattr(dataset.split, args.split), args.split,
                            hyper.seed)
    out = {"metadata": meta, "hyperparameters": dataclasses.asdict(hyper),
           args.split: dataclasses.asdict(report)}
    write_report(os.path.join(args.out, f"eval_{args.split}.json"), out)
    print(f"{args.split}: auc {report.auc:.4f}  acc {report.acc:.4f}  n={report.count}")
    return report


def cmd_ablate(args):
    hyper = resolve_hyper(args)
    dataset = _load_or_prepare(args)
    t0 = time.perf_counter()
    rows = run_ablation(args.kind, hyper, dataset, workers=args.workers)
    report = {"kind": args.kind, "metadata": run_metadata(hyper, args),
              "hyperparameters": dataclasses.asdict(hyper), "points": rows,
              "wall_seconds": time.perf_counter() - t0}
    write_report(os.path.join(args.out, f"ablate_{args.kind}.json"), report)
    field = SWEEPS[args.kind][0]
    for r in rows:
        print(f"{field}={r[field]}\ttest auc {r['test_auc']:.4f}\tacc {r['test_acc']:.4f}")
    return report


def cmd_stats(args):
    try:
        sm = read_score_matrix(args.matrix) if args.matrix else load_reference_scores()
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None
    try:
        report = analyse(sm, args.alpha, args.control)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    text = report.format()
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "stats.txt")
        with open(path + ".tmp", "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        os.replace(path + ".tmp", path)
    return report


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "eval": cmd_eval,
            "ablate": cmd_ablate, "stats": cmd_stats}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="ignore", under="ignore")
    try:
        COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return 0


if __name__ == "__main__":
    sys.exit(main())

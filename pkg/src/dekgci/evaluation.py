"""CTR metrics and ablation sweeps."""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class MetricReport:
    auc: float
    acc: float
    split: str
    count: int

    def __post_init__(self):
        if not (0.0 <= self.auc <= 1.0 and 0.0 <= self.acc <= 1.0):
            raise ValueError("metric outside [0, 1]")
        if self.count <= 0:
            raise ValueError("empty split")


def average_ranks(values):
    """1-based ascending ranks, ties sharing the mean of their positions."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    boundaries = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(xs)]])
    ranks = np.empty(len(x))
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def auc(scores, labels):
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    r = average_ranks(scores)
    return float((r[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def acc(scores, labels, threshold=0.5):
    """Accuracy of predicting a click when the score strictly exceeds ``threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) == 0:
        raise ValueError("accuracy of an empty prediction set")
    return float(np.mean((scores > threshold).astype(int) == labels))


SWEEPS = {
    "layers": ("layers", [1, 2, 3, 4, 5, 6]),
    "aggregator": ("aggregator", ["sum", "concat", "neighbor"]),
    "receptive_depth": ("depth", [1, 2, 3]),
    "variant": ("variant", ["dekgci", "ngcf", "lightgcn"]),
}


def _run_point(args):
    from .model import Recommender, evaluate_split, fit

    dataset, hyper, field, value = args
    t0 = time.perf_counter()
    model = Recommender.from_dataset(dataset, hyper)
    params, history = fit(model, dataset.split)
    test = evaluate_split(model, params, dataset.split.test, "test")
    return {
        field: value,
        "test_auc": test.auc,
        "test_acc": test.acc,
        "best_eval_auc": max(h["eval_auc"] for h in history),
        "epochs": len(history),
        "seconds": time.perf_counter() - t0,
    }


def run_ablation(kind, hyper, dataset, values=None, workers=1):
    """Train one model per sweep point and report its test AUC/ACC.

    ``kind`` is one of ``layers``, ``aggregator``, ``receptive_depth`` or
    ``variant``. Every point reuses ``hyper.seed``.
    """
    if kind not in SWEEPS:
        raise ValueError(f"unknown ablation {kind!r}; choose from {sorted(SWEEPS)}")
    field, default_values = SWEEPS[kind]
    values = default_values if values is None else list(values)
    jobs = [(dataset, hyper.replace(**{field: v}), field, v) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_point, jobs))
    return [_run_point(j) for j in jobs]


def write_report(path, report):
    """One JSON document per run; written atomically."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, default=_jsonable)
        fh.write("\n")
    os.replace(tmp, path)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")

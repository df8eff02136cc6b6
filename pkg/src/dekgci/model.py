"""Parameters, forward pass, loss, gradients, Adam and the training loop."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .graph import build_interaction_graph, build_kg
from .item_tower import ReceptiveConfig, item_representation, sample_receptive_field
from .user_tower import PropagationConfig, aggregate_user, propagate, propagate_batch

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
CLAMP_EPS = 1e-7


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    batchsize: int = 32
    n_neighbor: int = 8
    dim: int = 64
    lr: float = 5e-4
    layers: int = 3
    aggregator: str = "sum"
    variant: str = "dekgci"
    leaky_slope: float = 0.2
    depth: int = 1
    max_epochs: int = 50
    patience: int = 5
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("batchsize", "n_neighbor", "dim", "layers", "depth", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr < 0 or self.weight_decay < 0:
            raise ValueError("lr and weight_decay must be non-negative")
        self.propagation  # validates aggregator/variant/slope

    @property
    def propagation(self):
        return PropagationConfig(self.layers, self.dim, self.aggregator, self.variant,
                                 self.leaky_slope)

    @property
    def receptive(self):
        return ReceptiveConfig(self.depth, self.n_neighbor)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


PRESETS = {
    "movielens": Hyperparams(batchsize=1024, n_neighbor=10, dim=128, lr=5e-4, layers=3),
    "book": Hyperparams(batchsize=16, n_neighbor=8, dim=16, lr=5e-4, layers=6),
    "lastfm": Hyperparams(batchsize=32, n_neighbor=8, dim=64, lr=5e-4, layers=3),
}

# rating threshold used to derive implicit positives for each preset dataset
POSITIVE_THRESHOLD = {"movielens": 4.0, "book": None, "lastfm": None}


def param_shapes(hyper, n_users, n_entities, n_relations):
    d = hyper.dim
    width = hyper.propagation.final_dim
    shapes = {
        "user_emb": (n_users, d),
        "entity_emb": (n_entities, d),
        "relation_emb": (n_relations, width),
    }
    if hyper.variant != "lightgcn":
        for layer in range(1, hyper.layers + 1):
            shapes[f"w1.{layer}"] = (d, d)
            if hyper.variant == "ngcf":
                shapes[f"ngcf_w2.{layer}"] = (d, d)
    for i in range(1, hyper.depth):
        shapes[f"kg_w.{i}"] = (d, d)
        shapes[f"kg_b.{i}"] = (d,)
    shapes["w2"] = (width, d)
    shapes["b"] = (width,)
    return shapes


def xavier_bound(fan_in, fan_out):
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(shapes, seed):
    """Xavier-uniform matrices (fan_out = rows, fan_in = columns); biases zero."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in shapes.items():
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = xavier_bound(shape[1], shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


class Recommender:
    """Static structure of one trained model: graphs, item-entity alignment, hyperparameters."""

    def __init__(self, graph, kg, item_entity, hyper):
        self.graph = graph
        self.kg = kg
        self.item_entity = np.asarray(item_entity, dtype=np.int64)
        self.hyper = hyper
        adj = graph.norm_adj()
        self.adj = (adj, adj.T.tocsr())

    @classmethod
    def from_dataset(cls, dataset, hyper):
        train = dataset.split.train
        graph = build_interaction_graph(train[train[:, 2] == 1], dataset.n_users, dataset.n_items)
        kg = build_kg(dataset.kg.triples, dataset.kg.entity_count, dataset.kg.relation_count)
        return cls(graph, kg, dataset.ids.item_entity, hyper)

    def shapes(self):
        return param_shapes(self.hyper, self.graph.n_users, self.kg.entity_count,
                            max(self.kg.relation_count, 1))

    def init_params(self, seed=None):
        return init_params(self.shapes(), self.hyper.seed if seed is None else seed)

    def user_tables(self, params):
        cfg = self.hyper.propagation
        item0 = ag.take(params["entity_emb"], self.item_entity)
        users, _ = propagate(self.adj, params["user_emb"], item0, params, cfg)
        return users

    def user_repr(self, params, users, tables=None):
        """Aggregated user vectors; without ``tables`` only the batch's subgraph is propagated."""
        if tables is None:
            rows = propagate_batch(self.graph, self.adj, users, params["user_emb"],
                                   params["entity_emb"], params, self.hyper.propagation,
                                   self.item_entity)
        else:
            rows = [ag.take(t, users) for t in tables]
        return aggregate_user(rows, self.hyper.aggregator)

    def logits(self, params, users, items, rng, tables=None, sample=None):
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        e_u = self.user_repr(params, users, tables)
        e_v = item_representation(
            e_u, self.item_entity[items], self.kg, params, self.hyper.receptive, rng,
            self.hyper.leaky_slope, sample,
        )
        return ag.sum(ag.mul(e_u, e_v), axis=-1)

    def sample(self, items, rng):
        return sample_receptive_field(self.kg, self.item_entity[np.asarray(items)],
                                      self.hyper.receptive, rng)


def _as_tensors(params):
    return {k: ag.parameter(v) for k, v in params.items()}


def predict(model, params, users, items, rng, chunk=4096):
    """Click probabilities; the propagated user tables are computed once."""
    tables = [t.data for t in model.user_tables(params)]
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    out = np.empty(len(users))
    for lo in range(0, len(users), chunk):
        sl = slice(lo, lo + chunk)
        z = model.logits(params, users[sl], items[sl], rng, tables=tables)
        out[sl] = ag.sigmoid_array(z.data)
    return out


def batch_loss(model, params, batch, rng, sample=None):
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if len(batch) == 0:
        raise ValueError("empty batch")
    z = model.logits(params, batch[:, 0], batch[:, 1], rng, sample=sample)
    return float(ag.bce_from_logits(z, batch[:, 2], CLAMP_EPS).data)


def backward(model, params, batch, rng, sample=None):
    """Loss and exact gradients for every parameter tensor (zero where untouched)."""
    batch = np.asarray(batch, dtype=np.int64).reshape(-1, 3)
    if len(batch) == 0:
        raise ValueError("empty batch")
    tp = _as_tensors(params)
    z = model.logits(tp, batch[:, 0], batch[:, 1], rng, sample=sample)
    loss = ag.bce_from_logits(z, batch[:, 2], CLAMP_EPS)
    loss.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in tp.items()}
    return float(loss.data), grads


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, lr, state, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place bias-corrected Adam update with optional decoupled weight decay."""
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for k, p in params.items():
        g = grads[k]
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        if weight_decay:
            p -= lr * weight_decay * p
        denom = np.sqrt(v / c2)
        denom += eps
        step = m * (lr / c1)
        step /= denom
        p -= step
    return params


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


EVAL_STREAM = {"train": 0, "eval": 1, "test": 2}


def evaluate_split(model, params, examples, split="eval", seed=None):
    from .evaluation import MetricReport, acc, auc

    seed = model.hyper.seed if seed is None else seed
    ex = np.asarray(examples, dtype=np.int64).reshape(-1, 3)
    scores = predict(model, params, ex[:, 0], ex[:, 1], _rng(seed, 3, EVAL_STREAM.get(split, 9)))
    return MetricReport(auc(scores, ex[:, 2]), acc(scores, ex[:, 2]), split, len(ex))


def fit(model, split, hyper=None, params=None, on_epoch=None):
    """Mini-batch Adam with per-epoch eval AUC, keeping the best epoch's parameters.

    Returns ``(best_params, history)`` where ``history`` is a list of per-epoch
    dicts. Raises :class:`TrainingDiverged` when the loss turns non-finite.
    """
    hyper = model.hyper if hyper is None else hyper
    params = model.init_params(hyper.seed) if params is None else {k: v.copy() for k, v in params.items()}
    state = AdamState.zeros_like(params)
    train = np.asarray(split.train, dtype=np.int64)
    best = {k: v.copy() for k, v in params.items()}
    best_auc = -np.inf
    stale = 0
    history = []
    for epoch in range(1, hyper.max_epochs + 1):
        t0 = time.perf_counter()
        order = _rng(hyper.seed, 1, epoch).permutation(len(train))
        total = 0.0
        for b, lo in enumerate(range(0, len(train), hyper.batchsize)):
            batch = train[order[lo : lo + hyper.batchsize]]
            loss, grads = backward(model, params, batch, _rng(hyper.seed, 2, epoch, b))
            if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                raise TrainingDiverged(f"non-finite loss/gradient at epoch {epoch}, batch {b}")
            total += loss
            adam_step(params, grads, hyper.lr, state, hyper.weight_decay)
        report = evaluate_split(model, params, split.eval, "eval", hyper.seed)
        entry = {
            "epoch": epoch,
            "loss": total / max(len(train), 1),
            "eval_auc": report.auc,
            "eval_acc": report.acc,
            "seconds": time.perf_counter() - t0,
        }
        history.append(entry)
        log.info("epoch %d loss %.5f eval auc %.4f acc %.4f", epoch, entry["loss"],
                 report.auc, report.acc)
        if on_epoch is not None:
            on_epoch(entry)
        if report.auc > best_auc:
            best_auc = report.auc
            best = {k: v.copy() for k, v in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= hyper.patience:
                break
    return best, history


def save_checkpoint(path, params, hyper, meta=None):
    """Versioned ``.npz`` of all tensors plus a ``key=value`` manifest alongside."""
    meta = dict(meta or {})
    tmp = f"{path}.tmp.npz"
    np.savez(
        tmp,
        __version__=CHECKPOINT_VERSION,
        __hyper__=json.dumps(dataclasses.asdict(hyper)),
        __meta__=json.dumps(meta),
        **{f"p:{k}": v for k, v in params.items()},
    )
    os.replace(tmp, path)
    manifest = {"version": CHECKPOINT_VERSION, **dataclasses.asdict(hyper), **meta}
    mtmp = f"{path}.manifest.tmp"
    with open(mtmp, "w", encoding="utf-8") as fh:
        for k, v in manifest.items():
            fh.write(f"{k}={v}\n")
    os.replace(mtmp, f"{path}.manifest")


def load_checkpoint(path):
    with np.load(path) as z:
        version = int(z["__version__"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: checkpoint version {version} unsupported")
        hyper = Hyperparams(**json.loads(str(z["__hyper__"])))
        meta = json.loads(str(z["__meta__"]))
        params = {k[2:]: z[k].copy() for k in z.files if k.startswith("p:")}
    return params, hyper, meta

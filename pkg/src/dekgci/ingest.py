"""Loading ratings and KG triples, negative sampling and 6:2:2 splitting.

Labeled examples are carried around as ``(N, 3)`` integer arrays whose columns
are ``user, item, label``; :class:`LabeledExample` is the single-record view.
"""
from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)

USER, ITEM, LABEL = 0, 1, 2


class ParseError(ValueError):
    """Raised for malformed input rows; carries the offending line number."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class LabeledExample(NamedTuple):
    user: int
    item: int
    label: int


@dataclass(frozen=True)
class IdMaps:
    user_map: dict
    item_map: dict
    item_entity: np.ndarray  # dense item index -> KG entity id

    @property
    def n_users(self):
        return len(self.user_map)

    @property
    def n_items(self):
        return len(self.item_map)

    def user_external(self):
        out = [None] * len(self.user_map)
        for raw, idx in self.user_map.items():
            out[idx] = raw
        return out

    def item_external(self):
        out = [None] * len(self.item_map)
        for raw, idx in self.item_map.items():
            out[idx] = raw
        return out


class Ratings(NamedTuple):
    positives: np.ndarray
    ids: IdMaps
    # (user, item) pairs observed below the threshold; excluded from negative sampling
    observed: np.ndarray


@dataclass(frozen=True)
class DatasetSplit:
    train: np.ndarray
    eval: np.ndarray
    test: np.ndarray

    def sizes(self):
        return len(self.train), len(self.eval), len(self.test)


@dataclass(frozen=True)
class KGTriples:
    triples: np.ndarray  # (T, 3) head, relation, tail
    entity_count: int
    relation_count: int


@dataclass(frozen=True)
class DatasetStats:
    num_users: int
    num_items: int
    num_interactions: int
    sparsity: float
    kg_entities: int = 0
    kg_relations: int = 0
    kg_triples: int = 0
    extra: dict = field(default_factory=dict)

    def summary(self):
        rows = [
            ("Users", self.num_users),
            ("Items", self.num_items),
            ("Interactions", self.num_interactions),
            ("Sparsity", f"{100 * self.sparsity:.2f}%"),
            ("KG entities", self.kg_entities),
            ("KG relations", self.kg_relations),
            ("KG triples", self.kg_triples),
        ]
        return "\n".join(f"{name:<14}{value}" for name, value in rows)


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            yield lineno, s.split()


def load_item2entity(path):
    """Two-column ``item_external entity_id`` alignment file -> dict."""
    mapping = {}
    for lineno, parts in _rows(path):
        if len(parts) != 2:
            raise ParseError(path, lineno, f"expected 2 fields, got {len(parts)}")
        try:
            ent = int(parts[1])
        except ValueError:
            raise ParseError(path, lineno, f"entity id {parts[1]!r} is not an integer") from None
        if ent < 0:
            raise ParseError(path, lineno, "negative entity id")
        mapping.setdefault(parts[0], ent)
    return mapping


def _sort_key(raw):
    try:
        return (0, int(raw), raw)
    except ValueError:
        return (1, 0, raw)


def load_ratings(path, positive_threshold=None, item2entity=None, header=False):
    """Read ``user item rating`` rows and keep the positive interactions.

    Rows with ``rating >= positive_threshold`` (every row when the threshold is
    None) become label-1 examples. With an ``item2entity`` mapping, rows for
    unaligned items are dropped and the item universe is the mapping's key set;
    otherwise the raw item id must be the integer entity id.

    Users are indexed only if they have at least one positive. Dense indices
    follow numeric order of the raw ids (lexicographic for non-numeric ids).
    """
    raw_rows = []
    for lineno, parts in _rows(path):
        if header:
            header = False
            continue
        if len(parts) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(parts)}")
        try:
            rating = float(parts[2])
        except ValueError:
            raise ParseError(path, lineno, f"rating {parts[2]!r} is not a number") from None
        if not math.isfinite(rating):
            raise ParseError(path, lineno, "rating is not finite")
        if item2entity is None:
            try:
                if int(parts[1]) < 0:
                    raise ValueError
            except ValueError:
                raise ParseError(
                    path, lineno, f"item {parts[1]!r} must be a non-negative entity id"
                ) from None
        raw_rows.append((parts[0], parts[1], rating))
    if not raw_rows:
        raise ValueError(f"{path}: no rating rows")

    if item2entity is not None:
        raw_rows = [r for r in raw_rows if r[1] in item2entity]
        items = sorted(item2entity, key=_sort_key)
    else:
        items = None

    pos = [(u, i) for u, i, r in raw_rows if positive_threshold is None or r >= positive_threshold]
    if not pos:
        raise ValueError(f"{path}: no rows pass the positive threshold")
    users = sorted({u for u, _ in pos}, key=_sort_key)
    if items is None:
        items = sorted({i for _, i in pos}, key=_sort_key)
    user_map = {u: k for k, u in enumerate(users)}
    item_map = {i: k for k, i in enumerate(items)}
    if item2entity is not None:
        item_entity = np.array([item2entity[i] for i in items], dtype=np.int64)
    else:
        item_entity = np.array([int(i) for i in items], dtype=np.int64)

    pairs = np.array([(user_map[u], item_map[i]) for u, i in pos], dtype=np.int64)
    pairs = np.unique(pairs, axis=0)
    positives = np.column_stack([pairs, np.ones(len(pairs), dtype=np.int64)])

    below = [
        (user_map[u], item_map[i])
        for u, i, r in raw_rows
        if positive_threshold is not None and r < positive_threshold and u in user_map
    ]
    observed = np.unique(np.array(below, dtype=np.int64).reshape(-1, 2), axis=0)
    return Ratings(positives, IdMaps(user_map, item_map, item_entity), observed)


def sample_negatives(positives, n_items, rng, observed=None):
    """Per user, draw as many unobserved items as that user has positives."""
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    seen = {}
    for u, i in positives[:, :2]:
        seen.setdefault(int(u), set()).add(int(i))
    counts = {u: len(s) for u, s in seen.items()}
    if observed is not None:
        for u, i in np.asarray(observed, dtype=np.int64).reshape(-1, 2):
            if int(u) in seen:
                seen[int(u)].add(int(i))

    out = []
    for u in sorted(seen):
        banned = np.fromiter(seen[u], dtype=np.int64)
        pool = np.setdiff1d(np.arange(n_items, dtype=np.int64), banned, assume_unique=True)
        want = counts[u]
        if len(pool) < want:
            log.warning("user %d: only %d unobserved items for %d positives", u, len(pool), want)
            want = len(pool)
        if want == 0:
            continue
        chosen = np.sort(rng.choice(pool, size=want, replace=False))
        out.append(np.column_stack([np.full(want, u), chosen, np.zeros(want, dtype=np.int64)]))
    if not out:
        return np.empty((0, 3), dtype=np.int64)
    return np.concatenate(out).astype(np.int64)


def split_examples(examples, rng):
    """Shuffle and cut into contiguous 60/20/20 blocks (remainder goes to test)."""
    examples = np.asarray(examples, dtype=np.int64).reshape(-1, 3)
    n = len(examples)
    if n < 5:
        raise ValueError(f"need at least 5 examples for a 6:2:2 split, got {n}")
    perm = rng.permutation(n)
    n_train = n * 6 // 10
    n_eval = n * 2 // 10
    shuffled = examples[perm]
    return DatasetSplit(
        shuffled[:n_train], shuffled[n_train : n_train + n_eval], shuffled[n_train + n_eval :]
    )


def load_kg(path, item_entities=None):
    """Read integer ``head relation tail`` rows."""
    rows = []
    for lineno, parts in _rows(path):
        if len(parts) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(parts)}")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise ParseError(path, lineno, "fields must be integers") from None
        if min(vals) < 0:
            raise ParseError(path, lineno, "ids must be non-negative")
        rows.append(vals)
    triples = np.array(rows, dtype=np.int64).reshape(-1, 3)
    max_ent = -1
    if len(triples):
        max_ent = int(max(triples[:, 0].max(), triples[:, 2].max()))
    if item_entities is not None and len(item_entities):
        max_ent = max(max_ent, int(np.max(item_entities)))
    n_rel = int(triples[:, 1].max()) + 1 if len(triples) else 0
    return KGTriples(triples, max_ent + 1, n_rel)


def compute_stats(num_users, num_items, num_interactions, kg=None):
    if num_users * num_items == 0:
        raise ValueError("sparsity undefined for an empty user-item matrix")
    sparsity = 1.0 - (num_interactions / 2) / (num_users * num_items)
    if kg is None:
        return DatasetStats(num_users, num_items, num_interactions, sparsity)
    return DatasetStats(
        num_users,
        num_items,
        num_interactions,
        sparsity,
        kg.entity_count,
        kg.relation_count,
        len(kg.triples),
    )


@dataclass(frozen=True)
class PreparedDataset:
    split: DatasetSplit
    ids: IdMaps
    kg: KGTriples
    stats: DatasetStats

    @property
    def n_users(self):
        return self.ids.n_users

    @property
    def n_items(self):
        return self.ids.n_items


def prepare(ratings_path, kg_path, item2entity_path=None, positive_threshold=None, seed=0,
            header=False):
    """Full preparation pipeline: positives, 1:1 negatives, split, stats."""
    mapping = load_item2entity(item2entity_path) if item2entity_path else None
    ratings = load_ratings(ratings_path, positive_threshold, mapping, header=header)
    kg = load_kg(kg_path, ratings.ids.item_entity)
    seeds = np.random.SeedSequence(seed).spawn(2)
    negatives = sample_negatives(
        ratings.positives, ratings.ids.n_items, np.random.default_rng(seeds[0]), ratings.observed
    )
    labeled = np.concatenate([ratings.positives, negatives])
    split = split_examples(labeled, np.random.default_rng(seeds[1]))
    stats = compute_stats(ratings.ids.n_users, ratings.ids.n_items, len(labeled), kg)
    return PreparedDataset(split, ratings.ids, kg, stats)


def write_examples(path, examples):
    """Line-delimited ``user item label``; written atomically."""
    tmp = f"{path}.tmp"
    np.savetxt(tmp, np.asarray(examples, dtype=np.int64).reshape(-1, 3), fmt="%d", delimiter="\t")
    os.replace(tmp, path)


def read_examples(path):
    arr = np.loadtxt(path, dtype=np.int64, ndmin=2)
    return arr.reshape(-1, 3)


def write_split(directory, split):
    os.makedirs(directory, exist_ok=True)
    for name in ("train", "eval", "test"):
        write_examples(os.path.join(directory, f"{name}.tsv"), getattr(split, name))


def read_split(directory):
    return DatasetSplit(
        *(read_examples(os.path.join(directory, f"{n}.tsv")) for n in ("train", "eval", "test"))
    )


def split_digest(split):
    h = hashlib.sha256()
    for part in (split.train, split.eval, split.test):
        h.update(np.ascontiguousarray(part, dtype=np.int64).tobytes())
        h.update(b"|")
    return h.hexdigest()


def file_digest(*paths):
    h = hashlib.sha256()
    for p in paths:
        if p is None:
            continue
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()[:16]


def save_prepared(directory, dataset, meta=None):
    """Split manifests plus one ``.npz`` holding ids, item-entity alignment and KG."""
    os.makedirs(directory, exist_ok=True)
    write_split(directory, dataset.split)
    tmp = os.path.join(directory, "dataset.tmp.npz")
    np.savez_compressed(
        tmp,
        user_external=np.array(dataset.ids.user_external(), dtype=str),
        item_external=np.array(dataset.ids.item_external(), dtype=str),
        item_entity=dataset.ids.item_entity,
        kg_triples=dataset.kg.triples,
        kg_counts=np.array([dataset.kg.entity_count, dataset.kg.relation_count]),
        num_interactions=dataset.stats.num_interactions,
    )
    os.replace(tmp, os.path.join(directory, "dataset.npz"))
    with open(os.path.join(directory, "stats.txt"), "w", encoding="utf-8") as fh:
        fh.write(dataset.stats.summary() + "\n")
        for k, v in (meta or {}).items():
            fh.write(f"{k}={v}\n")


def load_prepared(directory):
    split = read_split(directory)
    with np.load(os.path.join(directory, "dataset.npz")) as z:
        users = [str(x) for x in z["user_external"]]
        items = [str(x) for x in z["item_external"]]
        ids = IdMaps({u: k for k, u in enumerate(users)}, {i: k for k, i in enumerate(items)},
                     z["item_entity"].astype(np.int64))
        ec, rc = (int(x) for x in z["kg_counts"])
        kg = KGTriples(z["kg_triples"].astype(np.int64).reshape(-1, 3), ec, rc)
        interactions = int(z["num_interactions"])
    stats = compute_stats(ids.n_users, ids.n_items, interactions, kg)
    return PreparedDataset(split, ids, kg, stats)


def subsample_users(dataset, fraction, seed=0):
    """Keep the examples of a random ``fraction`` of users (ids are re-densified)."""
    rng = np.random.default_rng(seed)
    n = dataset.n_users
    keep = np.sort(rng.choice(n, size=max(1, int(round(fraction * n))), replace=False))
    remap = np.full(n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))

    def cut(part):
        part = part[remap[part[:, 0]] >= 0].copy()
        part[:, 0] = remap[part[:, 0]]
        return part

    split = DatasetSplit(cut(dataset.split.train), cut(dataset.split.eval), cut(dataset.split.test))
    external = dataset.ids.user_external()
    ids = IdMaps({external[u]: k for k, u in enumerate(keep)}, dataset.ids.item_map,
                 dataset.ids.item_entity)
    total = sum(split.sizes())
    return PreparedDataset(split, ids, dataset.kg, compute_stats(len(keep), ids.n_items, total,
                                                                 dataset.kg))

"""Interaction graph, knowledge graph adjacency and KG neighbour sampling."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

CACHE_VERSION = 1


@dataclass(frozen=True)
class InteractionGraph:
    """Bipartite user-item graph in CSR form on both sides.

    ``user_indptr/user_indices`` list the sorted items of every user and
    ``item_indptr/item_indices`` the sorted users of every item.
    """

    n_users: int
    n_items: int
    user_indptr: np.ndarray
    user_indices: np.ndarray
    item_indptr: np.ndarray
    item_indices: np.ndarray

    @property
    def user_degree(self):
        return np.diff(self.user_indptr)

    @property
    def item_degree(self):
        return np.diff(self.item_indptr)

    @property
    def n_edges(self):
        return len(self.user_indices)

    def items_of(self, u):
        return self.user_indices[self.user_indptr[u] : self.user_indptr[u + 1]]

    def users_of(self, v):
        return self.item_indices[self.item_indptr[v] : self.item_indptr[v + 1]]

    def has_edge(self, u, v):
        row = self.items_of(u)
        k = np.searchsorted(row, v)
        return k < len(row) and row[k] == v

    def norm_adj(self):
        """m x n sparse matrix holding 1/sqrt(|N_u||N_v|) on every edge."""
        du = self.user_degree.astype(np.float64)
        dv = self.item_degree.astype(np.float64)
        rows = np.repeat(np.arange(self.n_users), self.user_degree)
        vals = 1.0 / np.sqrt(du[rows] * dv[self.user_indices])
        return sp.csr_matrix(
            (vals, self.user_indices.copy(), self.user_indptr.copy()),
            shape=(self.n_users, self.n_items),
        )


def build_interaction_graph(train_positives, n_users, n_items):
    ex = np.asarray(train_positives, dtype=np.int64).reshape(-1, 3)
    if np.any(ex[:, 2] != 1):
        raise ValueError("interaction graph accepts label-1 examples only")
    if len(ex) and (ex[:, 0].min() < 0 or ex[:, 0].max() >= n_users
                    or ex[:, 1].min() < 0 or ex[:, 1].max() >= n_items):
        raise ValueError("user or item index out of range")
    edges = np.unique(ex[:, :2], axis=0) if len(ex) else np.empty((0, 2), dtype=np.int64)
    ucsr = sp.csr_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n_users, n_items)
    )
    ucsr.sort_indices()
    icsr = ucsr.T.tocsr()
    icsr.sort_indices()
    return InteractionGraph(
        n_users,
        n_items,
        ucsr.indptr.astype(np.int64),
        ucsr.indices.astype(np.int64),
        icsr.indptr.astype(np.int64),
        icsr.indices.astype(np.int64),
    )


def norm_coeff(u, v, g):
    if not g.has_edge(u, v):
        raise KeyError(f"({u}, {v}) is not an edge of the interaction graph")
    return 1.0 / np.sqrt(g.user_degree[u] * g.item_degree[v])


@dataclass(frozen=True)
class KnowledgeGraph:
    entity_count: int
    relation_count: int
    indptr: np.ndarray
    relations: np.ndarray
    tails: np.ndarray

    @property
    def degree(self):
        return np.diff(self.indptr)

    def neighbors(self, entity):
        lo, hi = self.indptr[entity], self.indptr[entity + 1]
        return self.relations[lo:hi], self.tails[lo:hi]


def build_kg(triples, entity_count, relation_count, bidirectional=True):
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if len(t):
        if t[:, [0, 2]].min() < 0 or t[:, [0, 2]].max() >= entity_count:
            raise ValueError("entity id out of range")
        if t[:, 1].min() < 0 or t[:, 1].max() >= relation_count:
            raise ValueError("relation id out of range")
    heads, rels, tails = t[:, 0], t[:, 1], t[:, 2]
    if bidirectional:
        heads, rels, tails = (
            np.concatenate([heads, tails]),
            np.concatenate([rels, rels]),
            np.concatenate([tails, heads]),
        )
    order = np.argsort(heads, kind="stable")
    counts = np.bincount(heads, minlength=entity_count)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return KnowledgeGraph(entity_count, relation_count, indptr, rels[order], tails[order])


class NeighborSample(NamedTuple):
    tails: np.ndarray
    relations: np.ndarray


def sample_neighbors(kg, entity, n_neighbor, rng):
    s = sample_neighbors_batch(kg, np.array([entity]), n_neighbor, rng)
    return NeighborSample(s.tails[0], s.relations[0])


def sample_neighbors_batch(kg, entities, n_neighbor, rng):
    """Fixed-size neighbour samples for an array of entities.

    Degree >= n_neighbor draws without replacement, smaller positive degree
    draws with replacement, and an isolated entity gets ``n_neighbor`` copies
    of a self-loop with relation 0. Output arrays have shape
    ``entities.shape + (n_neighbor,)``.
    """
    if n_neighbor < 1:
        raise ValueError("n_neighbor must be >= 1")
    ents = np.asarray(entities, dtype=np.int64)
    flat = ents.reshape(-1)
    if len(flat) and (flat.min() < 0 or flat.max() >= kg.entity_count):
        raise ValueError("entity id out of range")
    deg = kg.degree[flat]
    start = kg.indptr[flat]
    pos = np.empty((len(flat), n_neighbor), dtype=np.int64)

    small = (deg > 0) & (deg < n_neighbor)
    if small.any():
        draws = rng.random((int(small.sum()), n_neighbor))
        pos[small] = start[small, None] + (draws * deg[small, None]).astype(np.int64)
    for k in np.flatnonzero(deg >= n_neighbor):
        pos[k] = start[k] + rng.choice(deg[k], size=n_neighbor, replace=False)

    tails = np.empty_like(pos)
    rels = np.empty_like(pos)
    has = deg > 0
    tails[has] = kg.tails[pos[has]]
    rels[has] = kg.relations[pos[has]]
    tails[~has] = flat[~has, None]
    rels[~has] = 0
    shape = ents.shape + (n_neighbor,)
    return NeighborSample(tails.reshape(shape), rels.reshape(shape))


def save_graph_cache(path, graph, kg, dataset_hash, seed):
    tmp = f"{path}.tmp.npz"
    np.savez_compressed(
        tmp,
        version=CACHE_VERSION,
        dataset_hash=dataset_hash,
        seed=seed,
        n_users=graph.n_users,
        n_items=graph.n_items,
        user_indptr=graph.user_indptr,
        user_indices=graph.user_indices,
        item_indptr=graph.item_indptr,
        item_indices=graph.item_indices,
        kg_shape=np.array([kg.entity_count, kg.relation_count]),
        kg_indptr=kg.indptr,
        kg_relations=kg.relations,
        kg_tails=kg.tails,
    )
    os.replace(tmp, path)


def load_graph_cache(path, dataset_hash=None, seed=None):
    with np.load(path) as z:
        if int(z["version"]) != CACHE_VERSION:
            raise ValueError(f"{path}: cache version {int(z['version'])} != {CACHE_VERSION}")
        if dataset_hash is not None and str(z["dataset_hash"]) != dataset_hash:
            raise ValueError(f"{path}: cache built for a different dataset")
        if seed is not None and int(z["seed"]) != seed:
            raise ValueError(f"{path}: cache built with a different seed")
        graph = InteractionGraph(
            int(z["n_users"]), int(z["n_items"]), z["user_indptr"], z["user_indices"],
            z["item_indptr"], z["item_indices"],
        )
        ec, rc = (int(x) for x in z["kg_shape"])
        kg = KnowledgeGraph(ec, rc, z["kg_indptr"], z["kg_relations"], z["kg_tails"])
    return graph, kg

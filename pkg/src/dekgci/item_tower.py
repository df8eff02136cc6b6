"""Item representations from the knowledge graph.

A user-specific attention over each item's sampled KG neighbours weighs the
neighbour embeddings by how strongly the user's representation aligns with the
connecting relation. The weighted neighbour sum is added to the item's own
embedding and passed through an affine map and LeakyReLU.

Depth 1 uses raw entity embeddings of the direct neighbours. Larger depths
build the neighbours' vectors recursively from their own sampled neighbours;
intermediate hops use ``kg_w.<i>``/``kg_b.<i>`` (dim x dim) and only the last
iteration maps into the user-representation width with ``w2``/``b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .graph import sample_neighbors_batch


@dataclass(frozen=True)
class ReceptiveConfig:
    depth: int = 1
    n_neighbor: int = 8

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("receptive depth must be >= 1")
        if self.n_neighbor < 1:
            raise ValueError("n_neighbor must be >= 1")


def user_relation_score(e_user, e_rel):
    e_user = np.asarray(e_user, dtype=np.float64)
    e_rel = np.asarray(e_rel, dtype=np.float64)
    if e_user.shape != e_rel.shape:
        raise ValueError(f"dimension mismatch: {e_user.shape} vs {e_rel.shape}")
    return float(e_user @ e_rel)


def attention_weights(scores):
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("attention over an empty neighbour set")
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def neighbor_representation(weights, neighbor_embs):
    w = np.asarray(weights, dtype=np.float64)
    e = np.asarray(neighbor_embs, dtype=np.float64)
    if w.shape[0] != e.shape[0]:
        raise ValueError(f"{w.shape[0]} weights for {e.shape[0]} neighbours")
    return w @ e


def item_final(v0, v_nbr, w2, b, slope=0.2):
    v0 = np.asarray(v0, dtype=np.float64)
    v_nbr = np.asarray(v_nbr, dtype=np.float64)
    w2 = np.asarray(w2, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if v0.shape != v_nbr.shape or w2.shape[1] != v0.shape[-1] or b.shape[-1] != w2.shape[0]:
        raise ValueError("dimension mismatch in the item transform")
    z = w2 @ (v0 + v_nbr) + b
    return np.where(z > 0, z, slope * z)


def sample_receptive_field(kg, entities, cfg, rng):
    """Entities and relations of the sampled tree, hop by hop.

    ``ents[h]`` has shape ``(B, n**h)`` and ``rels[h]`` shape ``(B, n**h, n)``.
    """
    entities = np.asarray(entities, dtype=np.int64)
    ents = [entities.reshape(-1, 1)]
    rels = []
    for _ in range(cfg.depth):
        s = sample_neighbors_batch(kg, ents[-1], cfg.n_neighbor, rng)
        rels.append(s.relations)
        ents.append(s.tails.reshape(len(entities), -1))
    return ents, rels


def item_representation(user_repr, entities, kg, params, cfg, rng, slope=0.2, sample=None):
    """Final item vectors for a batch, attention conditioned on ``user_repr`` (B x D).

    ``params`` holds ``entity_emb``, ``relation_emb``, ``w2``, ``b`` (and the
    ``kg_w``/``kg_b`` pairs when ``cfg.depth > 1``), as tensors or arrays.
    Returns a ``(B, D)`` tensor.
    """
    ents, rels = sample if sample is not None else sample_receptive_field(kg, entities, cfg, rng)
    user_repr = ag._wrap(user_repr)
    batch, width = user_repr.shape
    n = cfg.n_neighbor
    u = ag.reshape(user_repr, (batch, 1, 1, width))

    weights = []
    for h in range(cfg.depth):
        r = ag.take(params["relation_emb"], rels[h])
        scores = ag.sum(ag.mul(r, u), axis=-1)
        weights.append(ag.reshape(ag.softmax(scores, axis=-1), (batch, n**h, n, 1)))

    vecs = [ag.take(params["entity_emb"], e) for e in ents]
    for it in range(cfg.depth):
        last = it == cfg.depth - 1
        w = params["w2"] if last else params[f"kg_w.{it + 1}"]
        b = params["b"] if last else params[f"kg_b.{it + 1}"]
        updated = []
        for h in range(cfg.depth - it):
            dim = vecs[h + 1].shape[-1]
            nb = ag.reshape(vecs[h + 1], (batch, n**h, n, dim))
            v_nbr = ag.sum(ag.mul(weights[h], nb), axis=2)
            z = ag.add(ag.linear(ag.add(vecs[h], v_nbr), w), b)
            updated.append(ag.leaky_relu(z, slope))
        vecs = updated
    return ag.reshape(vecs[0], (batch, vecs[0].shape[-1]))

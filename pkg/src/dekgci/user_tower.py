"""Layered user/item propagation over the interaction graph.

Every layer updates both sides of the bipartite graph so that layer ``l``
can read item states from layer ``l - 1``. The per-layer transform is shared
by the user and the item update. Functions accept either raw arrays or
:class:`~dekgci.autograd.Tensor` objects and return tensors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .graph import norm_coeff

AGGREGATORS = ("sum", "concat", "neighbor")
VARIANTS = ("dekgci", "ngcf", "lightgcn")


@dataclass(frozen=True)
class PropagationConfig:
    layers: int = 3
    dim: int = 64
    aggregator: str = "sum"
    variant: str = "dekgci"
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.layers < 1 or self.dim < 1:
            raise ValueError("layers and dim must be positive")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown propagation variant {self.variant!r}")
        if not 0.0 < self.leaky_slope <= 1.0:
            raise ValueError("leaky_slope must lie in (0, 1]")

    @property
    def final_dim(self):
        """Width of the aggregated user representation."""
        return final_dim(self.dim, self.layers, self.aggregator)


def final_dim(dim, layers, aggregator):
    if aggregator == "sum":
        return dim
    if aggregator == "concat":
        return (layers + 1) * dim
    if aggregator == "neighbor":
        return layers * dim
    raise ValueError(f"unknown aggregator {aggregator!r}")


def _value(x):
    return x.data if isinstance(x, ag.Tensor) else np.asarray(x, dtype=np.float64)


def message(u, v, graph, w1, item_prev):
    """Contribution of item ``v`` to user ``u`` at one layer."""
    w1 = _value(w1)
    e_v = _value(item_prev)[v]
    if w1.shape[1] != e_v.shape[0]:
        raise ValueError(f"transform expects dim {w1.shape[1]}, embedding has {e_v.shape[0]}")
    return norm_coeff(u, v, graph) * (w1 @ e_v)


def _sides(adj):
    if isinstance(adj, tuple):
        return adj
    fwd = sp.csr_matrix(adj)
    return fwd, fwd.T.tocsr()


def _update(adj, own_prev, other_prev, params, cfg, layer):
    """New states for one side of the graph from the other side's previous layer.

    ``adj`` maps the other side's rows onto this side (normalised weights).
    """
    nb = ag.spmm(adj, other_prev)
    if cfg.variant == "lightgcn":
        return nb
    w1 = params[f"w1.{layer}"]
    if cfg.variant == "dekgci":
        return ag.leaky_relu(ag.linear(nb, w1), cfg.leaky_slope)
    w2 = params[f"ngcf_w2.{layer}"]
    pre = ag.add(ag.linear(ag.add(own_prev, nb), w1), ag.linear(ag.mul(nb, own_prev), w2))
    return ag.leaky_relu(pre, cfg.leaky_slope)


def propagate_layer(adj, user_prev, item_prev, w1, slope):
    """One layer of the default rule: LeakyReLU of normalised, transformed neighbour sums."""
    adj, adj_t = _sides(adj)
    cfg = PropagationConfig(1, np.shape(_value(w1))[0], "sum", "dekgci", slope)
    p = {"w1.1": w1}
    return _update(adj, user_prev, item_prev, p, cfg, 1), _update(adj_t, item_prev, user_prev, p, cfg, 1)


def propagate_ngcf_layer(adj, user_prev, item_prev, w1, w2, slope):
    """NGCF rule: self term plus transformed neighbour and element-wise interaction terms."""
    adj, adj_t = _sides(adj)
    cfg = PropagationConfig(1, np.shape(_value(w1))[0], "sum", "ngcf", slope)
    p = {"w1.1": w1, "ngcf_w2.1": w2}
    return _update(adj, user_prev, item_prev, p, cfg, 1), _update(adj_t, item_prev, user_prev, p, cfg, 1)


def propagate_lightgcn_layer(adj, user_prev, item_prev):
    adj, adj_t = _sides(adj)
    return ag.spmm(adj, item_prev), ag.spmm(adj_t, user_prev)


def propagate(adj, user0, item0, params, cfg):
    """Run ``cfg.layers`` layers over the whole graph; returns user and item tables per layer.

    ``params`` maps ``"w1.<l>"`` (and ``"ngcf_w2.<l>"`` for the NGCF rule) to
    the per-layer transforms. ``adj`` is the normalised m x n adjacency or a
    precomputed ``(adj, adj.T)`` pair of CSR matrices.
    """
    adj, adj_t = _sides(adj)
    users, items = [ag._wrap(user0)], [ag._wrap(item0)]
    for layer in range(1, cfg.layers + 1):
        u = _update(adj, users[-1], items[-1], params, cfg, layer)
        i = _update(adj_t, items[-1], users[-1], params, cfg, layer)
        users.append(u)
        items.append(i)
    return users, items


def _gather_neighbors(indptr, indices, nodes):
    starts = indptr[nodes]
    lens = indptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
    return indices[offsets + np.arange(total)]


def receptive_sets(graph, users, layers, self_term=False):
    """Users and items whose layer-``l`` states feed the final states of ``users``.

    Returns two lists indexed by layer holding sorted node arrays. The batch
    users are kept at every layer because the aggregators read all of them.
    """
    batch = np.unique(np.asarray(users, dtype=np.int64))
    need_u = [None] * (layers + 1)
    need_i = [None] * (layers + 1)
    need_u[layers] = batch
    need_i[layers] = np.empty(0, dtype=np.int64)
    for l in range(layers, 0, -1):
        nu = [batch, _gather_neighbors(graph.item_indptr, graph.item_indices, need_i[l])]
        ni = [_gather_neighbors(graph.user_indptr, graph.user_indices, need_u[l])]
        if self_term:
            nu.append(need_u[l])
            ni.append(need_i[l])
        need_u[l - 1] = np.unique(np.concatenate(nu))
        need_i[l - 1] = np.unique(np.concatenate(ni))
    return need_u, need_i


def _rows(adj, rows, cols):
    return adj[rows][:, cols]


def propagate_batch(graph, adj, users, user_emb, item_emb, params, cfg, item_rows=None):
    """Per-layer states of ``users`` computed on their receptive subgraph only.

    Layer-0 item ``v`` is row ``item_rows[v]`` of ``item_emb`` (row ``v`` when
    ``item_rows`` is None).
    Returns a list of ``len(users) x d`` tensors, layer 0 first; values equal
    the corresponding rows of :func:`propagate`.
    """
    adj, adj_t = _sides(adj)
    users = np.asarray(users, dtype=np.int64)
    need_u, need_i = receptive_sets(graph, users, cfg.layers, cfg.variant == "ngcf")
    u_prev = ag.take(user_emb, need_u[0])
    i_prev = ag.take(item_emb, need_i[0] if item_rows is None else item_rows[need_i[0]])
    out = [ag.take(u_prev, np.searchsorted(need_u[0], users))]
    for layer in range(1, cfg.layers + 1):
        own = None
        if cfg.variant == "ngcf":
            own = ag.take(u_prev, np.searchsorted(need_u[layer - 1], need_u[layer]))
        u_next = _update(_rows(adj, need_u[layer], need_i[layer - 1]), own, i_prev, params, cfg,
                         layer)
        if not len(need_i[layer]):
            i_prev = ag.constant(np.zeros((0, u_next.shape[-1])))
        else:
            own = None
            if cfg.variant == "ngcf":
                own = ag.take(i_prev, np.searchsorted(need_i[layer - 1], need_i[layer]))
            i_prev = _update(_rows(adj_t, need_i[layer], need_u[layer - 1]), own, u_prev, params,
                             cfg, layer)
        u_prev = u_next
        out.append(ag.take(u_prev, np.searchsorted(need_u[layer], users)))
    return out


def aggregate_user(layer_tables, aggregator):
    """Combine per-layer user states (layer 0 first) into the final representation."""
    if aggregator == "sum":
        out = layer_tables[0]
        for t in layer_tables[1:]:
            out = ag.add(out, t)
        return ag._wrap(out)
    if aggregator == "concat":
        return ag.concat(layer_tables, axis=-1)
    if aggregator == "neighbor":
        if len(layer_tables) < 2:
            raise ValueError("neighbor aggregation needs at least one propagated layer")
        return ag.concat(layer_tables[1:], axis=-1)
    raise ValueError(f"unknown aggregator {aggregator!r}")

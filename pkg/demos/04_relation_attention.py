"""User-specific attention over an item's knowledge-graph neighbours.

One item links to a director through relation 0 and to a genre through
relation 1. Two users whose representations align with different relation
embeddings end up with different item vectors for the very same item.
"""
import numpy as np

from dekgci import graph, item_tower

kg = graph.build_kg([(0, 0, 1), (0, 1, 2)], entity_count=3, relation_count=2)
d = 2
params = {
    "entity_emb": np.array([[0.1, 0.1], [1.0, 0.0], [0.0, 1.0]]),
    "relation_emb": np.array([[2.0, 0.0], [0.0, 2.0]]),
    "w2": np.eye(d),
    "b": np.zeros(d),
}
cfg = item_tower.ReceptiveConfig(depth=1, n_neighbor=2)
users = {"cares about relation 0": [1.5, 0.0], "cares about relation 1": [0.0, 1.5]}

for label, u in users.items():
    scores = [item_tower.user_relation_score(u, r) for r in params["relation_emb"]]
    w = item_tower.attention_weights(scores)
    v = item_tower.item_representation(np.array([u]), [0], kg, params, cfg,
                                       np.random.default_rng(0))
    print(f"user {label}: weights {np.round(w, 3)}  item vector {np.round(v.data[0], 3)}")

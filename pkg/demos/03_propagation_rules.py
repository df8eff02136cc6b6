"""How the three propagation rules treat the same small interaction graph.

Users 0 and 1 share item 0; user 2 only touches item 2, so after one layer
its state depends on item 2 alone and after two layers on user 1 as well.
"""
import numpy as np

from dekgci import graph, user_tower

edges = np.array([(0, 0, 1), (0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 2, 1)])
g = graph.build_interaction_graph(edges, 3, 3)
print("normalised adjacency\n", np.round(g.norm_adj().toarray(), 4))

rng = np.random.default_rng(0)
d = 3
users0, items0 = rng.normal(size=(3, d)), rng.normal(size=(3, d))
params = {f"w1.{l}": rng.normal(scale=0.6, size=(d, d)) for l in (1, 2)}
params.update({f"ngcf_w2.{l}": rng.normal(scale=0.6, size=(d, d)) for l in (1, 2)})

for variant in ("dekgci", "ngcf", "lightgcn"):
    cfg = user_tower.PropagationConfig(layers=2, dim=d, variant=variant)
    users, _ = user_tower.propagate(g.norm_adj(), users0, items0, params, cfg)
    final = user_tower.aggregate_user([t.data for t in users], "sum")
    print(f"\n{variant}: summed user representation")
    print(np.round(final.data, 4))

# with an identity transform and slope 1 the default rule loses all nonlinearity
ident = {f"w1.{l}": np.eye(d) for l in (1, 2)}
a, _ = user_tower.propagate(g.norm_adj(), users0, items0, ident,
                            user_tower.PropagationConfig(2, d, leaky_slope=1.0))
b, _ = user_tower.propagate(g.norm_adj(), users0, items0, {},
                            user_tower.PropagationConfig(2, d, variant="lightgcn"))
print("\nidentity + slope 1 vs light rule, max gap:", np.abs(a[-1].data - b[-1].data).max())

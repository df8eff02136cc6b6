"""Tiny hand-built model instances shared by several test modules."""
import numpy as np

from dekgci import graph as G
from dekgci.model import Hyperparams, Recommender

# 3 users, items 0-2 are entities 0-2, entity 3 is a pure KG attribute
TRAIN_POS = np.array([(0, 0, 1), (0, 1, 1), (1, 1, 1), (1, 2, 1), (2, 2, 1)])
BATCH = np.array([(0, 0, 1), (0, 2, 0), (1, 1, 1), (1, 0, 0), (2, 2, 1), (2, 1, 0)])
TRIPLES = [(0, 0, 3), (1, 1, 3), (2, 0, 1)]


def toy_model(layers=2, dim=4, depth=1, aggregator="sum", variant="dekgci", n_neighbor=2,
              extra_entities=0):
    hyper = Hyperparams(batchsize=4, n_neighbor=n_neighbor, dim=dim, layers=layers,
                        aggregator=aggregator, variant=variant, depth=depth, seed=0)
    graph = G.build_interaction_graph(TRAIN_POS, 3, 3)
    kg = G.build_kg(TRIPLES, 4 + extra_entities, 2)
    return Recommender(graph, kg, np.arange(3), hyper)

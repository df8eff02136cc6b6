"""Double-sided knowledge-graph recommender: interaction-graph propagation for
users, relation-aware KG attention for items, trained jointly for CTR."""

from .evaluation import MetricReport, acc, auc, run_ablation
from .graph import (
    InteractionGraph, KnowledgeGraph, NeighborSample, build_interaction_graph, build_kg,
    norm_coeff, sample_neighbors,
)
from .ingest import (
    DatasetSplit, DatasetStats, IdMaps, LabeledExample, compute_stats, load_kg, load_ratings,
    prepare, sample_negatives, split_examples,
)
from .model import (
    PRESETS, AdamState, Hyperparams, Recommender, TrainingDiverged, adam_step, backward,
    batch_loss, fit, init_params, predict,
)
from .stats import ScoreMatrix, StatReport, analyse, friedman, holm_posthoc

__version__ = "0.1.0"

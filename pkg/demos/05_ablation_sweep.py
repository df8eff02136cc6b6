"""Sweep the user aggregator on synthetic data and compare test metrics.

Each sweep point trains a fresh model from the same seed; only the chosen
factor changes. Pass ``--workers`` to run points in parallel processes.
"""
import argparse
import tempfile

from dekgci import ingest, synthetic
from dekgci.evaluation import run_ablation
from dekgci.model import Hyperparams

parser = argparse.ArgumentParser()
parser.add_argument("--kind", default="aggregator",
                    choices=["aggregator", "layers", "receptive_depth", "variant"])
parser.add_argument("--workers", type=int, default=1)
args = parser.parse_args()

files = synthetic.make_dataset(tempfile.mkdtemp(), n_users=200, n_items=300, seed=1)
ds = ingest.prepare(*files, seed=0)
hyper = Hyperparams(batchsize=64, dim=16, layers=2, n_neighbor=4, lr=5e-3, max_epochs=8)
rows = run_ablation(args.kind, hyper, ds, workers=args.workers)

field = {"receptive_depth": "depth"}.get(args.kind, args.kind)
for r in rows:
    print(f"{field}={r[field]!s:<9} test auc {r['test_auc']:.3f}  acc {r['test_acc']:.3f}  "
          f"epochs {r['epochs']}  {r['seconds']:.1f}s")

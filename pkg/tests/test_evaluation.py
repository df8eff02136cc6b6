import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import rankdata

from dekgci import evaluation as E


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


@pytest.mark.parametrize("scores,labels,expected", [
    ([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0], 1.0),
    ([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1], 0.0),
    ([0.6, 0.4, 0.6, 0.4], [1, 0, 0, 1], 0.5),
])
def test_auc_examples(scores, labels, expected):
    assert E.auc(scores, labels) == expected


def test_auc_single_class():
    with pytest.raises(ValueError):
        E.auc([0.1, 0.2], [1, 1])


@pytest.mark.parametrize("scores,labels,expected", [
    ([0.9, 0.1], [1, 0], 1.0), ([0.5], [1], 0.0), ([0.7, 0.7, 0.2, 0.6], [1, 0, 0, 0], 0.5),
])
def test_acc_examples(scores, labels, expected):
    assert E.acc(scores, labels) == expected


def test_acc_boundary_predicts_negative():
    assert E.acc([0.5, 0.5], [0, 0]) == 1.0
    with pytest.raises(ValueError):
        E.acc([], [])


labelled = st.integers(2, 12).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 6).map(lambda x: x / 6), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


@settings(max_examples=300)
@given(labelled)
def test_auc_matches_pair_count(data):
    scores, labels = data
    assert E.auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)


@settings(max_examples=100)
@given(labelled, st.sampled_from([np.exp, np.arctan, lambda x: 3 * x - 7, lambda x: x**3]))
def test_auc_monotone_invariance(data, f):
    scores, labels = data
    assert E.auc(f(np.array(scores)), labels) == pytest.approx(E.auc(scores, labels), abs=1e-12)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=30))
def test_average_ranks_match_scipy(values):
    assert np.allclose(E.average_ranks(values), rankdata(values))


def test_metric_report_validation():
    E.MetricReport(0.5, 0.5, "eval", 10)
    with pytest.raises(ValueError):
        E.MetricReport(1.2, 0.5, "eval", 10)
    with pytest.raises(ValueError):
        E.MetricReport(0.5, 0.5, "eval", 0)


def test_run_ablation_rejects_unknown_kind(synthetic_dataset):
    from dekgci.model import Hyperparams
    with pytest.raises(ValueError):
        E.run_ablation("dropout", Hyperparams(), synthetic_dataset)


@pytest.mark.slow
def test_run_ablation_points(synthetic_dataset, tmp_path):
    from dekgci.model import Hyperparams
    hyper = Hyperparams(batchsize=128, dim=8, layers=1, n_neighbor=4, lr=5e-3, max_epochs=1)
    rows = E.run_ablation("aggregator", hyper, synthetic_dataset, values=["sum", "concat"])
    assert [r["aggregator"] for r in rows] == ["sum", "concat"]
    assert all(0 <= r["test_auc"] <= 1 for r in rows)
    path = tmp_path / "r.json"
    E.write_report(str(path), {"rows": rows, "x": np.float64(1.0)})
    assert '"aggregator": "concat"' in path.read_text()

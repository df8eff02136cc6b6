"""Friedman / Iman-Davenport omnibus tests and Holm post-hoc against a control.

Scores are higher-is-better; within each problem rank 1 is the best algorithm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.stats import norm

from .evaluation import average_ranks


@dataclass(frozen=True)
class ScoreMatrix:
    names: list
    problems: list
    scores: np.ndarray  # algorithms x problems

    def __post_init__(self):
        k, n = self.scores.shape
        if k < 2 or n < 2:
            raise ValueError("need at least 2 algorithms and 2 problems")
        if len(self.names) != k or len(self.problems) != n:
            raise ValueError("labels do not match the score table")
        if not np.isfinite(self.scores).all():
            raise ValueError("score table has missing or non-finite entries")


@dataclass(frozen=True)
class HolmRow:
    i: int
    algorithm: str
    z: float
    p: float
    threshold: float

    @property
    def rejected(self):
        return self.p < self.threshold


@dataclass(frozen=True)
class StatReport:
    names: list
    avg_ranks: np.ndarray
    chi2: float
    iman_davenport: float
    control: str
    holm: list

    def format(self):
        lines = ["algorithm\tavg_rank"]
        lines += [f"{n}\t{r:.6f}" for n, r in zip(self.names, self.avg_ranks)]
        lines.append(f"Friedman chi2_F\t{self.chi2:.7f}")
        lines.append(f"Iman-Davenport F_F\t{self.iman_davenport:.8f}")
        lines.append(f"control\t{self.control}")
        lines.append("i\talgorithm\tz\tp\tholm")
        lines += [f"{r.i}\t{r.algorithm}\t{r.z:.6f}\t{r.p:.6f}\t{r.threshold:.6f}"
                  for r in self.holm]
        return "\n".join(lines)


def read_score_matrix(path, delimiter="\t"):
    """Headered table: first column algorithm names, remaining columns problems."""
    with open(path, encoding="utf-8") as fh:
        rows = [ln.rstrip("\n").split(delimiter) for ln in fh
                if ln.strip() and not ln.startswith("#")]
    if len(rows) < 3:
        raise ValueError(f"{path}: expected a header and at least two algorithm rows")
    header, body = rows[0], rows[1:]
    width = len(header)
    names, values = [], []
    for lineno, row in enumerate(body, 2):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        try:
            values.append([float(v) for v in row[1:]])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric score") from None
        names.append(row[0])
    return ScoreMatrix(names, header[1:], np.array(values))


def reference_scores_path():
    return resources.files("dekgci") / "data" / "ctr_scores.tsv"


def load_reference_scores():
    with resources.as_file(reference_scores_path()) as p:
        return read_score_matrix(p)


def problem_ranks(sm):
    """Algorithms x problems rank table (1 = best, ties averaged)."""
    return np.column_stack([average_ranks(-sm.scores[:, j]) for j in range(sm.scores.shape[1])])


def friedman(sm):
    """Return ``(chi2_F, F_F, average ranks)``."""
    k, n = sm.scores.shape
    avg = problem_ranks(sm).mean(axis=1)
    chi2 = 12.0 * n / (k * (k + 1)) * float(np.sum(avg**2)) - 3.0 * n * (k + 1)
    if abs(chi2) < 1e-9:
        chi2 = 0.0
    denom = n * (k - 1) - chi2
    if denom <= 0:
        raise ValueError("Iman-Davenport statistic undefined (degenerate denominator)")
    return chi2, (n - 1) * chi2 / denom, avg


def holm_posthoc(avg_ranks, names, n_problems, control=None, alpha=0.05):
    """z-tests of every algorithm against the control, Holm step-down thresholds.

    The control defaults to the algorithm with the lowest average rank. Rows
    come back ordered by ascending p-value with thresholds ``alpha / (k - i)``.
    """
    avg_ranks = np.asarray(avg_ranks, dtype=np.float64)
    k = len(avg_ranks)
    c = int(np.argmin(avg_ranks)) if control is None else list(names).index(control)
    se = math.sqrt(k * (k + 1) / (6.0 * n_problems))
    others = [j for j in range(k) if j != c]
    z = {j: (avg_ranks[j] - avg_ranks[c]) / se for j in others}
    p = {j: float(2.0 * norm.sf(abs(z[j]))) for j in others}
    ordered = sorted(others, key=lambda j: (p[j], j))
    return [HolmRow(i, names[j], float(z[j]), p[j], alpha / (k - i))
            for i, j in enumerate(ordered, 1)]


def analyse(sm, alpha=0.05, control=None):
    chi2, ff, avg = friedman(sm)
    rows = holm_posthoc(avg, sm.names, sm.scores.shape[1], control, alpha)
    ctrl = control or sm.names[int(np.argmin(avg))]
    return StatReport(list(sm.names), avg, chi2, ff, ctrl, rows)

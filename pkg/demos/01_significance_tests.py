"""Rank-based comparison of eight recommenders over six dataset/metric columns.

The bundled score table holds AUC and ACC for three benchmarks. Each column is
ranked (1 = best), the Friedman statistic tests whether all algorithms share
one average rank, Iman-Davenport turns it into an F statistic, and Holm's
step-down procedure compares every algorithm with the best-ranked one.
"""
from scipy.stats import chi2, f

from dekgci import stats

sm = stats.load_reference_scores()
print("score table:", sm.scores.shape[0], "algorithms x", sm.scores.shape[1], "columns")

chi2_f, ff, avg = stats.friedman(sm)
k, n = sm.scores.shape
print(f"\nFriedman chi2_F = {chi2_f:.4f}  (critical {chi2.ppf(0.95, k - 1):.4f})")
print(f"Iman-Davenport F_F = {ff:.4f}  (critical {f.ppf(0.95, k - 1, (k - 1) * (n - 1)):.4f})")

print("\naverage ranks")
for name, r in sorted(zip(sm.names, avg), key=lambda t: t[1]):
    print(f"  {name:<10} {r:.3f}")

report = stats.analyse(sm)
print(f"\nHolm against {report.control}")
for row in report.holm:
    mark = "reject" if row.rejected else "keep"
    print(f"  {row.i}  {row.algorithm:<10} z={row.z:.4f}  p={row.p:.6f}  "
          f"alpha_i={row.threshold:.6f}  {mark}")

"""Finite-difference audit of the analytic training gradients.

Every gradient block (weights, means, covariances), under both SPD metrics
and both weight layouts, is compared against central differences of the
Bellman-residual loss on random instances.

Run:  python demos/gradient_validation.py
"""

from gmmq.gradcheck import run_gradcheck

report = run_gradcheck(seed=7, trials=15)
for line in report.lines():
    print(line)
print(f"\nworst cell: {report.max_error:.3e}  ({'OK' if report.passed else 'BROKEN'})")

"""The column-constrained baseline: scaling toward per-class mass targets.

Shows convergence on an easy instance, the relaxed fallback when the
candidate structure cannot meet the targets, and the marginal errors
before and after scaling.
"""

import numpy as np

from plrlab import (
    CandidateMatrix,
    PredictionMatrix,
    SinkhornConfig,
    clamp_prior,
    marginal_errors,
    proden_update,
    row_normalize,
    solar_update,
)
from plrlab.core import Rng

np.set_printoptions(precision=4, suppress=True)

rng = Rng(7)
n, c = 8, 4
f = PredictionMatrix(row_normalize(rng.uniform(0.05, 1.0, (n, c))))
s = CandidateMatrix(np.ones((n, c)))
r = clamp_prior(np.array([0.4, 0.3, 0.2, 0.1]))

# Row-only renormalization ignores the per-class targets entirely.
w0 = proden_update(f, s)
row_err, col_err = marginal_errors(w0, r)
print(f"masked renormalization: row_err={row_err:.2e} col_err={col_err:.4f}")

# Alternating scaling pushes the column sums toward n * r_j.
res = solar_update(f, s, r, SinkhornConfig(max_iters=200, tol=1e-4))
print(f"after {res.iterations_used} iterations: row_err={res.row_marginal_err:.2e} "
      f"col_err={res.col_marginal_err:.2e} relaxed={res.relaxed}")
print("column error per iteration:", np.asarray(res.col_err_history))
print("column sums:", res.w.values.sum(axis=0), " targets:", n * r.values)
print()

# With a class missing from every candidate set, its target is
# unreachable: the result is flagged relaxed but rows stay stochastic.
s_bad = CandidateMatrix(np.array([[1.0, 1.0, 1.0, 0.0]] * n))
res_bad = solar_update(f, s_bad, r, SinkhornConfig())
print(f"missing class: relaxed={res_bad.relaxed} "
      f"infeasible_columns={res_bad.infeasible_columns}")
print("rows still sum to one:", res_bad.w.values.sum(axis=1))

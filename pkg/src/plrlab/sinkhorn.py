"""Column-constrained pseudo-label baseline via Sinkhorn-Knopp scaling.

Adds the per-class mass constraint sum_i w_ij = N r_j on top of the
row-stochastic disambiguation problem and solves it by alternating
row/column scaling of the kernel K_ij = S_ij f_ij^lam. Column targets use
N = the batch handed in. Candidate-set zeros frequently make both marginal
sets unattainable; when the column error has not reached tolerance at the
iteration cap, the row-renormalized iterate is returned with
``relaxed=True`` (rows take priority, so output rows always sum to one).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CandidateMatrix,
    ClassPrior,
    PredictionMatrix,
    PseudoLabelMatrix,
    ShapeMismatch,
    validate_candidates,
)
from .solver import log_kernel

__all__ = ["SinkhornConfig", "SinkhornResult", "solar_update", "marginal_errors"]


@dataclass(frozen=True)
class SinkhornConfig:
    """Iteration cap, marginal tolerance, and prediction temperature."""

    max_iters: int = 50
    tol: float = 1e-3
    lam: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive")


@dataclass(frozen=True, eq=False)
class SinkhornResult:
    """Scaled pseudo-labels plus convergence diagnostics.

    ``col_err_history`` records the column marginal error once per
    iteration, measured with rows freshly scaled to one.
    ``infeasible_columns`` lists classes with prior mass but no candidate
    anywhere in the batch; their targets are dropped and ``relaxed`` is
    forced.
    """

    w: PseudoLabelMatrix
    iterations_used: int
    row_marginal_err: float
    col_marginal_err: float
    relaxed: bool
    infeasible_columns: tuple[int, ...] = ()
    col_err_history: np.ndarray | None = None


def marginal_errors(w: PseudoLabelMatrix, r: ClassPrior) -> tuple[float, float]:
    """Worst row deviation from 1 and worst column deviation from N*r_j (per sample)."""
    if w.n_classes != r.n_classes:
        raise ShapeMismatch(f"pseudo-labels have {w.n_classes} classes, prior {r.n_classes}")
    n = w.n_samples
    row_err = float(np.abs(w.values.sum(axis=1) - 1.0).max()) if n else 0.0
    col_err = float(np.abs(w.values.sum(axis=0) - n * r.values).max() / max(n, 1))
    return row_err, col_err


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.exp(a - amax).sum(axis=axis)) + np.squeeze(amax, axis=axis)
    return out


def solar_update(f: PredictionMatrix, s: CandidateMatrix, r: ClassPrior,
                 cfg: SinkhornConfig) -> SinkhornResult:
    """Alternate row/column scaling of S * f^lam toward both marginal sets.

    Each iteration scales rows exactly to one, measures the column error,
    and then rescales columns toward N*r_j. Exit happens when both
    marginal errors are within ``cfg.tol`` or after ``cfg.max_iters``
    iterations; either way a final row renormalization is applied.
    Scaling runs in log space; non-candidate entries stay exactly zero.
    """
    if f.values.shape != s.bits.shape:
        raise ShapeMismatch(f"predictions {f.values.shape} vs candidates {s.bits.shape}")
    if f.n_classes != r.n_classes:
        raise ShapeMismatch(f"predictions have {f.n_classes} classes, prior {r.n_classes}")
    validate_candidates(s)

    n, _ = f.values.shape
    log_k = log_kernel(f.values, s.bits, r.values, cfg.lam, 0.0)
    col_target = n * r.values
    feasible_col = s.bits.sum(axis=0) > 0
    infeasible = tuple(int(j) for j in np.flatnonzero(~feasible_col))

    log_v = np.zeros(f.n_classes)
    history = []
    iterations = 0
    for _ in range(cfg.max_iters):
        iterations += 1
        log_u = -_logsumexp(log_k + log_v[None, :], axis=1)
        scaled = np.exp(log_u[:, None] + log_k + log_v[None, :])
        col_err = float(np.abs(scaled.sum(axis=0) - col_target).max() / n)
        history.append(col_err)
        if col_err <= cfg.tol:
            break
        log_col = _logsumexp(log_u[:, None] + log_k, axis=0)
        log_v = np.where(feasible_col, np.log(col_target) - log_col, log_v)

    # Final row renormalization; row scalings cancel, so only the latest
    # column scaling matters (includes the pending one on the relaxed path).
    z = log_k + log_v[None, :]
    z = z - z.max(axis=1, keepdims=True)
    out = np.exp(z)
    out /= out.sum(axis=1, keepdims=True)
    w = PseudoLabelMatrix(out)
    row_err, col_err = marginal_errors(w, r)
    relaxed = bool(infeasible) or col_err > cfg.tol
    return SinkhornResult(w, iterations, row_err, col_err, relaxed,
                          infeasible, np.asarray(history))

"""Moving-average estimation of the marginal class prior.

The prior starts uniform and is blended once per epoch with an empirical
component drawn from the training set: the histogram of predicted classes
(``hard-pred``, the default), the mean predicted probabilities
(``soft-pred``), or the histogram of pseudo-label argmaxes
(``hard-pseudo``). Every update lands back on the clamped simplex.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    ClassPrior,
    EmptyBatch,
    PredictionMatrix,
    PseudoLabelMatrix,
    ShapeMismatch,
    clamp_prior,
)

__all__ = [
    "RULES",
    "PriorEstimator",
    "init_uniform",
    "update_hard_pred",
    "update_soft_pred",
    "update_hard_pseudo",
    "prior_error",
]

RULES = ("hard-pred", "soft-pred", "hard-pseudo")


@dataclass(frozen=True)
class PriorEstimator:
    """Current prior estimate plus the blending coefficient and update rule."""

    r: ClassPrior
    mu: float = 0.1
    rule: str = "hard-pred"

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")


def init_uniform(c: int, mu: float = 0.1, rule: str = "hard-pred") -> PriorEstimator:
    """Estimator starting from the uniform prior over c classes."""
    if c < 1:
        raise ValueError("need at least one class")
    return PriorEstimator(ClassPrior(np.full(c, 1.0 / c)), mu, rule)


def _blend(est: PriorEstimator, empirical: np.ndarray) -> PriorEstimator:
    mixed = est.mu * est.r.values + (1.0 - est.mu) * empirical
    return replace(est, r=clamp_prior(mixed))


def _argmax_histogram(values: np.ndarray, c: int) -> np.ndarray:
    if values.shape[0] == 0:
        raise EmptyBatch("cannot update the prior from an empty batch")
    # np.argmax breaks ties toward the smallest class index.
    picks = np.argmax(values, axis=1)
    return np.bincount(picks, minlength=c) / values.shape[0]


def update_hard_pred(est: PriorEstimator, p: PredictionMatrix) -> PriorEstimator:
    """Blend with the histogram of predicted (argmax) classes."""
    if est.rule != "hard-pred":
        raise ValueError(f"estimator rule is {est.rule!r}, not 'hard-pred'")
    if p.n_classes != est.r.n_classes:
        raise ShapeMismatch(f"predictions have {p.n_classes} classes, prior {est.r.n_classes}")
    return _blend(est, _argmax_histogram(p.values, p.n_classes))


def update_soft_pred(est: PriorEstimator, p: PredictionMatrix) -> PriorEstimator:
    """Blend with the column means of the predicted probabilities."""
    if est.rule != "soft-pred":
        raise ValueError(f"estimator rule is {est.rule!r}, not 'soft-pred'")
    if p.n_classes != est.r.n_classes:
        raise ShapeMismatch(f"predictions have {p.n_classes} classes, prior {est.r.n_classes}")
    if p.n_samples == 0:
        raise EmptyBatch("cannot update the prior from an empty batch")
    return _blend(est, p.values.mean(axis=0))


def update_hard_pseudo(est: PriorEstimator, w: PseudoLabelMatrix) -> PriorEstimator:
    """Blend with the histogram of pseudo-label argmax classes."""
    if est.rule != "hard-pseudo":
        raise ValueError(f"estimator rule is {est.rule!r}, not 'hard-pseudo'")
    if w.n_classes != est.r.n_classes:
        raise ShapeMismatch(f"pseudo-labels have {w.n_classes} classes, prior {est.r.n_classes}")
    return _blend(est, _argmax_histogram(w.values, w.n_classes))


def prior_error(est: PriorEstimator, truth: ClassPrior) -> float:
    """Largest per-class gap between the estimate and a reference prior."""
    if est.r.n_classes != truth.n_classes:
        raise ShapeMismatch(f"estimate has {est.r.n_classes} classes, truth {truth.n_classes}")
    return float(np.abs(est.r.values - truth.values).max())

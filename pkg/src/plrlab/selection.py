"""Per-class small-loss sample selection with prior-proportional caps.

A batch is bucketed by pseudo-label argmax; each bucket keeps its
lowest-loss samples up to min(bucket size, ceil(rho * r_k * batch)).
The fraction rho ramps up linearly over the first epochs so that early,
unreliable pseudo-labels admit fewer samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ClassPrior, PseudoLabelMatrix, ShapeMismatch

__all__ = ["SelectionConfig", "rho_at", "select_reliable"]


@dataclass(frozen=True)
class SelectionConfig:
    """Linear ramp of the selection fraction rho."""

    rho_start: float = 0.2
    rho_end: float = 0.5
    ramp_epochs: int = 50

    def __post_init__(self):
        if not 0.0 <= self.rho_start <= self.rho_end <= 1.0:
            raise ValueError("need 0 <= rho_start <= rho_end <= 1")
        if self.ramp_epochs < 1:
            raise ValueError("ramp_epochs must be at least 1")


def rho_at(cfg: SelectionConfig, epoch: int) -> float:
    """Selection fraction at a given epoch: linear ramp, then constant."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    if epoch >= cfg.ramp_epochs:
        return cfg.rho_end
    return cfg.rho_start + (cfg.rho_end - cfg.rho_start) * epoch / cfg.ramp_epochs


def _cap(budget: float) -> int:
    # Ceiling with a relative guard so exact-integer budgets computed in
    # floating point (0.2 * 0.5 * 10, say) do not round up an extra slot.
    return int(math.ceil(budget * (1.0 - 1e-12)))


def select_reliable(w: PseudoLabelMatrix, losses: np.ndarray, r: ClassPrior,
                    rho: float) -> np.ndarray:
    """Indices of the per-class smallest-loss samples, sorted ascending.

    Ties in loss are broken toward the smaller index, which makes the
    selected set deterministic and monotone in rho.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.shape[0] != w.n_samples:
        raise ShapeMismatch(f"losses shape {losses.shape} vs {w.n_samples} samples")
    if w.n_classes != r.n_classes:
        raise ShapeMismatch(f"pseudo-labels have {w.n_classes} classes, prior {r.n_classes}")
    if np.any(losses < 0.0):
        raise ValueError("losses must be nonnegative")

    batch = w.n_samples
    labels = np.argmax(w.values, axis=1)
    kept = []
    for k in np.unique(labels):
        bucket = np.flatnonzero(labels == k)
        quota = min(bucket.size, _cap(rho * r.values[k] * batch))
        if quota <= 0:
            continue
        order = np.lexsort((bucket, losses[bucket]))
        kept.append(bucket[order[:quota]])
    if not kept:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(kept)).astype(np.int64)

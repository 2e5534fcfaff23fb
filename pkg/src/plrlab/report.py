"""Group-wise accuracy, prior-adjusted prediction, kernel timing, and result files.

Two machine-readable sinks are defined here. The metrics file is
line-oriented::

    plrlab-metrics v1
    epoch=<int> lr=<g> loss_cls=<g> ... prior_err=<g> pseudo_ms=<g>

and the benchmark file is plain CSV with header
``method,batch,classes,reps,mean_s,std_s``. Floats are printed at full
precision so parsing recovers them exactly. '#' lines are comments.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    CandidateMatrix,
    ClassPrior,
    PlrHyperparams,
    PredictionMatrix,
    Rng,
    ShapeMismatch,
    TooFewReps,
    clamp_prior,
    row_normalize,
)
from .datagen import longtail_counts
from .sinkhorn import SinkhornConfig, solar_update
from .solver import plr_update, proden_update

__all__ = [
    "GroupAccuracy",
    "BenchRecord",
    "group_accuracy",
    "logits_adjust_predict",
    "bench_pseudo",
    "emit_metrics",
    "read_metrics",
    "emit_bench",
]


@dataclass(frozen=True)
class GroupAccuracy:
    """Test accuracy overall and within the many/medium/few class groups."""

    overall: float
    many: float
    medium: float
    few: float


@dataclass(frozen=True)
class BenchRecord:
    """Wall-clock timing of one pseudo-label method at one problem size."""

    method: str
    batch_size: int
    n_classes: int
    repetitions: int
    mean_s: float
    std_s: float


def group_accuracy(preds, truth, boundaries: tuple[int, int]) -> GroupAccuracy:
    """Percent correct overall and per class group (grouping by true class)."""
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise ShapeMismatch(f"predictions {preds.shape} vs truth {truth.shape}")
    lo, hi = boundaries
    correct = preds == truth
    out = []
    for mask in (np.ones_like(truth, dtype=bool), truth < lo,
                 (truth >= lo) & (truth < hi), truth >= hi):
        out.append(100.0 * correct[mask].mean() if mask.any() else 0.0)
    return GroupAccuracy(*out)


def logits_adjust_predict(logits, r: ClassPrior, phi: float) -> np.ndarray:
    """Row argmax of logits_j - phi*log r_j; ties go to the smaller class."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] != r.n_classes:
        raise ShapeMismatch(f"logits {logits.shape} vs {r.n_classes} classes")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return np.argmax(logits - phi * np.log(r.values), axis=1)


def _bench_instance(batch_size: int, n_classes: int, rng: Rng):
    # A long-tailed batch, the regime these updates are built for: labels
    # drawn from an imbalanced prior, negatives flipped in at a rate that
    # keeps candidate sets around six labels regardless of class count.
    # The per-class mass constraints are tight here, so the scaling
    # baseline has real work to do.
    flip = min(0.5, 5.0 / max(n_classes - 1, 1))
    r = clamp_prior(longtail_counts(1000, 100.0, n_classes).astype(np.float64))
    labels = rng.generator.choice(n_classes, size=batch_size, p=r.values)
    bits = (rng.uniform(size=(batch_size, n_classes)) < flip).astype(np.float64)
    bits[np.arange(batch_size), labels] = 1.0
    f = PredictionMatrix(row_normalize(rng.uniform(0.05, 1.0, (batch_size, n_classes))))
    return f, CandidateMatrix(bits), r


def bench_pseudo(methods, batch_size: int, n_classes: int, reps: int, rng: Rng,
                 plr_params: PlrHyperparams | None = None,
                 sinkhorn_cfg: SinkhornConfig | None = None) -> list[BenchRecord]:
    """Time each pseudo-label method on one shared random batch.

    Each method gets one untimed warm-up call, then ``reps`` timed calls
    on identical inputs; reported is the mean and standard deviation of
    the per-call wall-clock seconds.
    """
    if reps < 3:
        raise TooFewReps(f"need at least 3 repetitions, got {reps}")
    h = plr_params if plr_params is not None else PlrHyperparams()
    cfg = sinkhorn_cfg if sinkhorn_cfg is not None else SinkhornConfig()
    f, s, r = _bench_instance(batch_size, n_classes, rng)
    calls = {
        "plr": lambda: plr_update(f, s, r, h),
        "proden": lambda: proden_update(f, s),
        "sinkhorn": lambda: solar_update(f, s, r, cfg),
    }
    records = []
    for name in methods:
        if name not in calls:
            raise ValueError(f"unknown method {name!r}; choose from {sorted(calls)}")
        run = calls[name]
        run()
        times = np.empty(reps)
        for i in range(reps):
            t0 = time.perf_counter()
            run()
            times[i] = time.perf_counter() - t0
        records.append(BenchRecord(name, batch_size, n_classes, reps,
                                   float(times.mean()), float(times.std())))
    return records


_METRIC_FIELDS = ("epoch", "lr", "loss_cls", "loss_cons", "loss_mix",
                  "acc_all", "acc_many", "acc_med", "acc_few",
                  "prior_err", "pseudo_ms")


def emit_metrics(metrics, path, comments=()) -> None:
    """Write per-epoch metric lines; overwrites any existing file."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("plrlab-metrics v1\n")
        for line in comments:
            fh.write(f"# {line}\n")
        for m in metrics:
            values = (m.epoch, m.lr, m.loss_cls, m.loss_cons, m.loss_mix,
                      m.acc_all, m.acc_many, m.acc_med, m.acc_few,
                      m.prior_err, m.pseudo_ms)
            parts = []
            for key, val in zip(_METRIC_FIELDS, values):
                parts.append(f"{key}={val:d}" if key == "epoch" else f"{key}={val:.17g}")
            fh.write(" ".join(parts) + "\n")


def read_metrics(path):
    """Parse a metrics file back into EpochMetrics records."""
    from .core import FormatError
    from .trainer import EpochMetrics

    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != "plrlab-metrics v1":
        raise FormatError(1, "bad metrics header")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        fields = {}
        for token in line.split(" "):
            key, _, val = token.partition("=")
            fields[key] = val
        if tuple(fields) != _METRIC_FIELDS:
            raise FormatError(lineno, "unexpected metric fields")
        try:
            out.append(EpochMetrics(int(fields["epoch"]),
                                    *(float(fields[k]) for k in _METRIC_FIELDS[1:])))
        except ValueError as exc:
            raise FormatError(lineno, str(exc)) from None
    return out


def emit_bench(records, path, comments=()) -> None:
    """Write benchmark records as CSV under the documented schema."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("method,batch,classes,reps,mean_s,std_s\n")
        for rec in records:
            fh.write(f"{rec.method},{rec.batch_size},{rec.n_classes},"
                     f"{rec.repetitions},{rec.mean_s:.17g},{rec.std_s:.17g}\n")

"""Alternating training loop for a small feed-forward softmax classifier.

Each batch gets a weak and a strong augmented view. Pseudo-labels are
solved in closed form from the weak-view predictions and the current class
prior, then used three ways: a classification loss on the whole batch, a
consistency loss on strong-view predictions of the reliably selected
samples, and a mixup loss on convex combinations of the selected samples.
The prior is re-estimated once per epoch from full-train-set weak-view
predictions. Training runs in two stages: a short pre-estimation stage
whose only output is a coarse prior, after which the model is
re-initialized and trained for real with that prior carried over.

Backpropagation through the ReLU MLP is written out analytically; there
is no autodiff dependency.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    PROB_EPS,
    CandidateMatrix,
    NonFiniteLoss,
    PlrHyperparams,
    PredictionMatrix,
    PseudoLabelMatrix,
    Rng,
    ShapeMismatch,
    clamp_prior,
)
from .datagen import PartialDataset
from .prior import (
    PriorEstimator,
    init_uniform,
    update_hard_pred,
    update_hard_pseudo,
    update_soft_pred,
)
from .report import group_accuracy
from .selection import SelectionConfig, rho_at, select_reliable
from .sinkhorn import SinkhornConfig, solar_update
from .solver import plr_update

__all__ = [
    "ModelParams",
    "TrainConfig",
    "EpochMetrics",
    "init_params",
    "forward",
    "soft_ce",
    "grad_logits_soft_ce",
    "sgd_momentum_step",
    "cosine_lr",
    "augment",
    "mixup_batch",
    "train",
]


@dataclass
class ModelParams:
    """MLP weights/biases plus matching SGD momentum buffers."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    vel_w: list[np.ndarray] = field(default_factory=list)
    vel_b: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ShapeMismatch("weights and biases must pair up")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ShapeMismatch("layer weight/bias shapes disagree")
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("model parameters must be finite")
        if not self.vel_w:
            self.vel_w = [np.zeros_like(w) for w in self.weights]
            self.vel_b = [np.zeros_like(b) for b in self.biases]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the dataset itself."""

    epochs: int = 100
    batch_size: int = 256
    lr0: float = 0.01
    momentum: float = 0.9
    hidden: tuple[int, ...] = (64, 64)
    plr: PlrHyperparams = field(default_factory=PlrHyperparams)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    prior_rule: str = "hard-pred"
    mu_schedule: tuple[float, float] = (0.1, 0.01)
    pre_epochs: int = 20
    weak_noise_sigma: float = 0.05
    strong_noise_sigma: float = 0.2
    strong_dropout_p: float = 0.2
    mixup_alpha: float = 4.0
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    solver: str = "plr"
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    restrict_all_losses: bool = False
    freeze_prior: bool = False
    timing: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.pre_epochs < 0:
            raise ValueError("epochs and batch_size must be positive, pre_epochs nonnegative")
        if not self.lr0 > 0 or not 0.0 <= self.momentum < 1.0:
            raise ValueError("need lr0 > 0 and momentum in [0, 1)")
        if self.weak_noise_sigma < 0 or self.strong_noise_sigma < 0:
            raise ValueError("noise sigmas must be nonnegative")
        if not 0.0 <= self.strong_dropout_p <= 1.0:
            raise ValueError("strong_dropout_p must lie in [0, 1]")
        if not self.mixup_alpha > 0:
            raise ValueError("mixup_alpha must be positive")
        if any(wt < 0 for wt in self.loss_weights):
            raise ValueError("loss weights must be nonnegative")
        if self.solver not in ("plr", "sinkhorn"):
            raise ValueError("solver must be 'plr' or 'sinkhorn'")


@dataclass(frozen=True)
class EpochMetrics:
    """Per-epoch observables recorded during stage-2 training."""

    epoch: int
    lr: float
    loss_cls: float
    loss_cons: float
    loss_mix: float
    acc_all: float
    acc_many: float
    acc_med: float
    acc_few: float
    prior_err: float
    pseudo_ms: float


def init_params(input_dim: int, hidden: tuple[int, ...], n_classes: int,
                rng: Rng) -> ModelParams:
    """He-initialized weights, zero biases and momentum buffers."""
    dims = (input_dim,) + tuple(hidden) + (n_classes,)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = math.sqrt(2.0 / fan_in)
        weights.append(rng.normal(scale=scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases)


def _forward_cached(params: ModelParams, x: np.ndarray):
    """Forward pass keeping post-ReLU activations for backprop."""
    acts = [x]
    out = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        out = np.maximum(out @ w + b, 0.0)
        acts.append(out)
    logits = out @ params.weights[-1] + params.biases[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    probs = expz / expz.sum(axis=1, keepdims=True)
    return acts, logits, probs


def forward(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, PredictionMatrix]:
    """Logits and row-softmax probabilities for a feature batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[0]:
        raise ShapeMismatch(f"input shape {x.shape} vs input dim {params.weights[0].shape[0]}")
    _, logits, probs = _forward_cached(params, x)
    return logits, PredictionMatrix(probs)


def _backward(params: ModelParams, acts: list[np.ndarray],
              dlogits: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of a scalar loss given its gradient at the logits."""
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    grad = dlogits
    for layer in range(n_layers - 1, -1, -1):
        gw[layer] = acts[layer].T @ grad
        gb[layer] = grad.sum(axis=0)
        if layer > 0:
            grad = (grad @ params.weights[layer].T) * (acts[layer] > 0.0)
    return gw, gb


def soft_ce(probs: PredictionMatrix, w: PseudoLabelMatrix) -> np.ndarray:
    """Per-sample cross entropy of predictions against soft targets."""
    if probs.values.shape != w.values.shape:
        raise ShapeMismatch(f"predictions {probs.values.shape} vs targets {w.values.shape}")
    logp = np.log(np.maximum(probs.values, PROB_EPS))
    return -(w.values * logp).sum(axis=1)


def grad_logits_soft_ce(probs: PredictionMatrix, w: PseudoLabelMatrix) -> np.ndarray:
    """Gradient of the mean soft cross entropy with respect to the logits."""
    if probs.values.shape != w.values.shape:
        raise ShapeMismatch(f"predictions {probs.values.shape} vs targets {w.values.shape}")
    return (probs.values - w.values) / probs.values.shape[0]


def sgd_momentum_step(params: ModelParams, grads, lr: float, momentum: float) -> ModelParams:
    """In-place SGD with momentum: buf = momentum*buf + grad; p -= lr*buf."""
    gw, gb = grads
    for i in range(len(params.weights)):
        params.vel_w[i] = momentum * params.vel_w[i] + gw[i]
        params.vel_b[i] = momentum * params.vel_b[i] + gb[i]
        params.weights[i] = params.weights[i] - lr * params.vel_w[i]
        params.biases[i] = params.biases[i] - lr * params.vel_b[i]
    return params


def cosine_lr(epoch: int, total_epochs: int, lr0: float) -> float:
    """Half-cosine decay from lr0 at epoch 0 toward 0 at total_epochs."""
    if not 0 <= epoch < total_epochs:
        raise ValueError("epoch must lie in [0, total_epochs)")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


def augment(x: np.ndarray, rng: Rng, kind: str, cfg: TrainConfig) -> np.ndarray:
    """Weak view: Gaussian jitter. Strong view: heavier jitter plus dropout."""
    if kind == "weak":
        return x + cfg.weak_noise_sigma * rng.normal(size=x.shape)
    if kind == "strong":
        out = x + cfg.strong_noise_sigma * rng.normal(size=x.shape)
        keep = rng.uniform(size=x.shape) >= cfg.strong_dropout_p
        return out * keep
    raise ValueError(f"unknown augmentation kind {kind!r}")


def mixup_batch(x: np.ndarray, w: PseudoLabelMatrix, alpha: float, rng: Rng,
                lam_mix: float | None = None,
                perm: np.ndarray | None = None) -> tuple[np.ndarray, PseudoLabelMatrix]:
    """Convex combination of the batch with a permuted copy of itself.

    The coefficient is Beta(alpha, alpha) and the partner permutation is
    uniform; both can be forced for tests and ablations. Target rows stay
    on the simplex because the combination is convex.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != w.n_samples:
        raise ShapeMismatch(f"{x.shape[0]} inputs vs {w.n_samples} targets")
    if lam_mix is None:
        lam_mix = rng.beta(alpha, alpha)
    if perm is None:
        perm = rng.permutation(x.shape[0])
    x_mix = lam_mix * x + (1.0 - lam_mix) * x[perm]
    w_mix = lam_mix * w.values + (1.0 - lam_mix) * w.values[perm]
    return x_mix, PseudoLabelMatrix(w_mix)


def _pseudo_labels(probs: PredictionMatrix, s, est: PriorEstimator,
                   cfg: TrainConfig) -> PseudoLabelMatrix:
    if cfg.solver == "sinkhorn":
        return solar_update(probs, s, est.r, cfg.sinkhorn).w
    return plr_update(probs, s, est.r, cfg.plr)


def _candidate_rows(ds: PartialDataset, idx: np.ndarray) -> CandidateMatrix:
    return CandidateMatrix(ds.candidates.bits[idx])


def _check_finite(name: str, value: float, epoch: int, batch: int) -> None:
    if not math.isfinite(value):
        raise NonFiniteLoss(f"{name} loss is {value} at epoch {epoch}, batch {batch}")


def _run_stage(params: ModelParams, ds: PartialDataset, cfg: TrainConfig,
               est: PriorEstimator, epochs: int, rng: Rng,
               metrics_out: list | None, test: PartialDataset | None,
               truth: np.ndarray | None):
    weights_cls, weights_cons, weights_mix = cfg.loss_weights
    for epoch in range(epochs):
        ep_rng = rng.child(epoch)
        lr = cosine_lr(epoch, epochs, cfg.lr0)
        rho = rho_at(cfg.selection, epoch)
        order = ep_rng.permutation(ds.n_samples)
        sums = np.zeros(3)
        counts = np.zeros(3)
        pseudo_seconds = 0.0

        for start in range(0, ds.n_samples, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = ds.features[idx]
            sb = _candidate_rows(ds, idx)
            weak = augment(xb, ep_rng, "weak", cfg)
            strong = augment(xb, ep_rng, "strong", cfg)

            acts_w, _, probs_w_raw = _forward_cached(params, weak)
            if not np.all(np.isfinite(probs_w_raw)):
                raise NonFiniteLoss(
                    f"predictions went non-finite at epoch {epoch}, "
                    f"batch {start // cfg.batch_size}; try a smaller learning rate")
            probs_w = PredictionMatrix(probs_w_raw)
            t0 = time.perf_counter() if cfg.timing else 0.0
            w = _pseudo_labels(probs_w, sb, est, cfg)
            if cfg.timing:
                pseudo_seconds += time.perf_counter() - t0
            assert not np.any(w.values[sb.bits == 0.0] > 0.0)

            sample_losses = soft_ce(probs_w, w)
            selected = select_reliable(w, sample_losses, est.r, rho)

            if cfg.restrict_all_losses and selected.size:
                loss_cls = float(sample_losses[selected].mean())
                d_cls = np.zeros_like(probs_w_raw)
                d_cls[selected] = (probs_w_raw[selected] - w.values[selected]) / selected.size
                n_cls = selected.size
            else:
                loss_cls = float(sample_losses.mean())
                d_cls = grad_logits_soft_ce(probs_w, w)
                n_cls = idx.size
            _check_finite("classification", loss_cls, epoch, start // cfg.batch_size)
            gw, gb = _backward(params, acts_w, weights_cls * d_cls)
            sums[0] += loss_cls * n_cls
            counts[0] += n_cls

            if selected.size:
                w_sel = PseudoLabelMatrix(w.values[selected])
                x_mix, w_mix = mixup_batch(weak[selected], w_sel,
                                           cfg.mixup_alpha, ep_rng)

                acts_s, _, probs_s_raw = _forward_cached(params, strong[selected])
                probs_s = PredictionMatrix(probs_s_raw)
                cons_losses = soft_ce(probs_s, w_sel)
                loss_cons = float(cons_losses.mean())
                _check_finite("consistency", loss_cons, epoch, start // cfg.batch_size)
                gw2, gb2 = _backward(params, acts_s,
                                     weights_cons * grad_logits_soft_ce(probs_s, w_sel))

                acts_m, _, probs_m_raw = _forward_cached(params, x_mix)
                probs_m = PredictionMatrix(probs_m_raw)
                mix_losses = soft_ce(probs_m, w_mix)
                loss_mix = float(mix_losses.mean())
                _check_finite("mixup", loss_mix, epoch, start // cfg.batch_size)
                gw3, gb3 = _backward(params, acts_m,
                                     weights_mix * grad_logits_soft_ce(probs_m, w_mix))

                for i in range(len(gw)):
                    gw[i] = gw[i] + gw2[i] + gw3[i]
                    gb[i] = gb[i] + gb2[i] + gb3[i]
                sums[1] += loss_cons * selected.size
                counts[1] += selected.size
                sums[2] += loss_mix * selected.size
                counts[2] += selected.size

            sgd_momentum_step(params, (gw, gb), lr, cfg.momentum)

        # Epoch-level prior refresh from full-train-set weak-view predictions.
        full_weak = augment(ds.features, ep_rng, "weak", cfg)
        _, probs_full = forward(params, full_weak)
        if not cfg.freeze_prior:
            if est.rule == "soft-pred":
                est = update_soft_pred(est, probs_full)
            elif est.rule == "hard-pseudo":
                t0 = time.perf_counter() if cfg.timing else 0.0
                w_full = _pseudo_labels(probs_full, ds.candidates, est, cfg)
                if cfg.timing:
                    pseudo_seconds += time.perf_counter() - t0
                est = update_hard_pseudo(est, w_full)
            else:
                est = update_hard_pred(est, probs_full)

        if metrics_out is not None:
            if test is not None:
                _, test_probs = forward(params, test.features)
                preds = np.argmax(test_probs.values, axis=1)
                acc = group_accuracy(preds, test.true_labels, test.group_boundaries)
                accs = (acc.overall, acc.many, acc.medium, acc.few)
            else:
                accs = (math.nan,) * 4
            prior_err = float(np.abs(est.r.values - truth).max()) if truth is not None else math.nan
            means = [sums[i] / counts[i] if counts[i] else 0.0 for i in range(3)]
            metrics_out.append(EpochMetrics(
                epoch, lr, means[0], means[1], means[2],
                accs[0], accs[1], accs[2], accs[3],
                prior_err, pseudo_seconds * 1e3,
            ))
    return est


def train(ds: PartialDataset, cfg: TrainConfig,
          test: PartialDataset | None = None) -> tuple[ModelParams, list[EpochMetrics], PriorEstimator]:
    """Two-stage run: prior pre-estimation, re-init, then the real training.

    Returns the trained parameters, per-epoch metrics for the second
    stage, and the final prior estimator.
    """
    rng = Rng(cfg.seed)
    c = ds.n_classes
    truth = None
    if ds.class_counts.sum() > 0:
        truth = clamp_prior(ds.class_counts.astype(np.float64)).values

    est = init_uniform(c, mu=cfg.mu_schedule[0], rule=cfg.prior_rule)
    if cfg.pre_epochs > 0 and not cfg.freeze_prior:
        pre_params = init_params(ds.feature_dim, cfg.hidden, c, rng.child(0))
        est = _run_stage(pre_params, ds, cfg, est, cfg.pre_epochs, rng.child(1),
                         None, None, None)

    params = init_params(ds.feature_dim, cfg.hidden, c, rng.child(2))
    est = replace(est, mu=cfg.mu_schedule[1])
    metrics: list[EpochMetrics] = []
    est = _run_stage(params, ds, cfg, est, cfg.epochs, rng.child(3),
                     metrics, test, truth)
    return params, metrics, est

"""Command-line frontend: dataset generation, training, evaluation, benchmarking.

Four subcommands (``gen``, ``train``, ``eval``, ``bench``) share a common
option scheme: built-in defaults are overridden by an optional config file
of ``key = value`` lines (keys mirror the long flag names, '#' starts a
comment), which in turn is overridden by explicit flags. The effective
configuration is echoed as comment lines into every output file. Exit
codes: 0 success, 1 usage or I/O failure, 2 numeric failure.

Model files are line-oriented::

    plrlab-model v1 dims=<d,h1,...,c>
    prior <c floats>
    W0 <fan_in*fan_out floats, row-major>
    b0 <floats>
    ...
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .core import (
    ClassPrior,
    FormatError,
    NonFiniteLoss,
    PlrError,
    PlrHyperparams,
    Rng,
)
from .datagen import DatasetSpec, gen_dataset, read_dataset, write_dataset
from .report import bench_pseudo, emit_bench, emit_metrics, group_accuracy, logits_adjust_predict
from .selection import SelectionConfig
from .sinkhorn import SinkhornConfig
from .trainer import ModelParams, TrainConfig, forward, train

__all__ = ["main", "write_model", "read_model"]


def write_model(params: ModelParams, prior: ClassPrior, path, comments=()) -> None:
    """Serialize MLP weights and the estimated class prior."""
    dims = ",".join(str(d) for d in params.dims)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"plrlab-model v1 dims={dims}\n")
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("prior " + " ".join(f"{x:.17g}" for x in prior.values) + "\n")
        for i, (w, b) in enumerate(zip(params.weights, params.biases)):
            fh.write(f"W{i} " + " ".join(f"{x:.17g}" for x in w.ravel()) + "\n")
            fh.write(f"b{i} " + " ".join(f"{x:.17g}" for x in b) + "\n")


def read_model(path) -> tuple[ModelParams, ClassPrior]:
    """Parse a model file back into parameters and prior."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln]
    if not lines or not lines[0].startswith("plrlab-model v1 dims="):
        raise FormatError(1, "bad model header")
    try:
        dims = tuple(int(x) for x in lines[0].split("dims=", 1)[1].split(","))
    except ValueError:
        raise FormatError(1, "bad dims in model header") from None
    if len(dims) < 2:
        raise FormatError(1, "model needs at least input and output dims")
    fields = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        try:
            fields[key] = np.array([float(x) for x in rest.split()])
        except ValueError:
            raise FormatError(lineno, f"bad numbers under {key!r}") from None
    try:
        prior = ClassPrior(fields["prior"])
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            weights.append(fields[f"W{i}"].reshape(fan_in, fan_out))
            biases.append(fields[f"b{i}"])
    except (KeyError, ValueError) as exc:
        raise FormatError(len(lines), f"model fields inconsistent: {exc}") from None
    return ModelParams(weights, biases), prior


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 on usage errors (help still exits 0)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class UsageError(ValueError):
    """Bad or missing options; reported with the subcommand usage text."""


def _opt(flags, dest, conv, default, help_text, flag=False):
    return {"flags": flags, "dest": dest, "conv": conv, "default": default,
            "help": help_text, "flag": flag}


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x != "")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "on", "yes"):
        return True
    if value in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_GEN_OPTS = [
    _opt(["--classes"], "classes", int, 10, "number of classes"),
    _opt(["--head"], "head", int, 500, "sample count of the largest class"),
    _opt(["--gamma"], "gamma", float, 100.0, "imbalance ratio head/tail"),
    _opt(["--psi"], "psi", float, 0.5, "per-negative-label flip probability"),
    _opt(["--dim"], "dim", int, 16, "feature dimension"),
    _opt(["--sep"], "sep", float, 4.0, "class-mean hypersphere radius"),
    _opt(["--test-per-class"], "test_per_class", int, 50, "balanced test samples per class"),
    _opt(["--superclass-size"], "superclass_size", int, 0,
         "restrict flips to contiguous superclasses of this size (0 = off)"),
    _opt(["--seed"], "seed", int, 0, "generation seed"),
    _opt(["-o", "--out"], "out", str, None, "output path for the training split (required)"),
    _opt(["--test-out"], "test_out", str, None,
         "output path for the test split (default: <out stem>_test<ext>)"),
]

_TRAIN_OPTS = [
    _opt(["-d", "--data"], "data", str, None, "training dataset file (required)"),
    _opt(["--test"], "test", str, None,
         "test dataset file for per-epoch metrics (default: <data stem>_test<ext> if present)"),
    _opt(["--lambda"], "lam", float, 3.0, "entropy temperature of the pseudo-label solver"),
    _opt(["--m"], "m", float, 2.0, "prior-penalty exponent of the pseudo-label solver"),
    _opt(["--epochs"], "epochs", int, 100, "training epochs (after pre-estimation)"),
    _opt(["--pre-epochs"], "pre_epochs", int, 20, "prior pre-estimation epochs"),
    _opt(["--batch"], "batch", int, 256, "batch size"),
    _opt(["--lr"], "lr", float, 0.01, "initial learning rate (cosine-decayed)"),
    _opt(["--momentum"], "momentum", float, 0.9, "SGD momentum"),
    _opt(["--hidden"], "hidden", _int_list, (64, 64), "hidden layer sizes, comma-separated"),
    _opt(["--solver"], "solver", str, "plr", "pseudo-label solver: plr or sinkhorn"),
    _opt(["--sk-iters"], "sk_iters", int, 50, "Sinkhorn iteration cap"),
    _opt(["--sk-tol"], "sk_tol", float, 1e-3, "Sinkhorn marginal tolerance"),
    _opt(["--sk-lambda"], "sk_lambda", float, 1.0, "Sinkhorn prediction temperature"),
    _opt(["--prior-rule"], "prior_rule", str, "hard-pred",
         "prior estimation rule: hard-pred, soft-pred, or hard-pseudo"),
    _opt(["--mu1"], "mu1", float, 0.1, "moving-average coefficient, pre-estimation stage"),
    _opt(["--mu2"], "mu2", float, 0.01, "moving-average coefficient, main stage"),
    _opt(["--rho-start"], "rho_start", float, 0.2, "selection fraction at epoch 0"),
    _opt(["--rho-end"], "rho_end", float, 0.5, "selection fraction after the ramp"),
    _opt(["--ramp-epochs"], "ramp_epochs", int, 50, "epochs over which rho ramps up"),
    _opt(["--weak-sigma"], "weak_sigma", float, 0.05, "weak-view noise sigma"),
    _opt(["--strong-sigma"], "strong_sigma", float, 0.2, "strong-view noise sigma"),
    _opt(["--dropout"], "dropout", float, 0.2, "strong-view coordinate dropout probability"),
    _opt(["--mixup-alpha"], "mixup_alpha", float, 4.0, "Beta(alpha, alpha) mixup coefficient"),
    _opt(["--w-cls"], "w_cls", float, 1.0, "classification loss weight"),
    _opt(["--w-cons"], "w_cons", float, 1.0, "consistency loss weight"),
    _opt(["--w-mix"], "w_mix", float, 1.0, "mixup loss weight"),
    _opt(["--freeze-prior"], "freeze_prior", _bool, False,
         "keep the prior uniform instead of estimating it", flag=True),
    _opt(["--restrict-losses"], "restrict_losses", _bool, False,
         "apply the classification loss only to selected samples", flag=True),
    _opt(["--timing"], "timing", _bool, True,
         "record wall-clock pseudo-label time (off for byte-reproducible metrics)"),
    _opt(["--seed"], "seed", int, 0, "training seed"),
    _opt(["--metrics-out"], "metrics_out", str, None,
         "metrics file path (default: <data stem>_metrics.txt)"),
    _opt(["--model-out"], "model_out", str, None,
         "model file path (default: <data stem>_model.txt)"),
]

_EVAL_OPTS = [
    _opt(["-m", "--model"], "model", str, None, "model file (required)"),
    _opt(["-d", "--data"], "data", str, None, "dataset file to evaluate on (required)"),
    _opt(["--phi"], "phi", float, 0.0, "prior-compensation strength for prediction"),
    _opt(["-o", "--out"], "out", str, None,
         "summary output path (default: <model stem>_eval.txt)"),
]

_BENCH_OPTS = [
    _opt(["--batch"], "batch", _int_list, (256,), "batch sizes, comma-separated"),
    _opt(["--classes"], "classes", _int_list, (100,), "class counts, comma-separated"),
    _opt(["--reps"], "reps", int, 10, "timed repetitions per method (min 3)"),
    _opt(["--methods"], "methods", str, "plr,proden,sinkhorn",
         "comma-separated subset of plr, proden, sinkhorn"),
    _opt(["--lambda"], "lam", float, 3.0, "entropy temperature for the plr method"),
    _opt(["--m"], "m", float, 2.0, "prior-penalty exponent for the plr method"),
    _opt(["--sk-iters"], "sk_iters", int, 50, "Sinkhorn iteration cap"),
    _opt(["--seed"], "seed", int, 0, "benchmark data seed"),
    _opt(["-o", "--out"], "out", str, None, "benchmark CSV path (required)"),
]

_COMMAND_OPTS = {"gen": _GEN_OPTS, "train": _TRAIN_OPTS, "eval": _EVAL_OPTS,
                 "bench": _BENCH_OPTS}


def _add_options(parser: argparse.ArgumentParser, opts) -> None:
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="config file of 'key = value' lines mirroring the flags")
    for opt in opts:
        if opt["flag"]:
            parser.add_argument(*opt["flags"], dest=opt["dest"], action="store_const",
                                const=True, default=None,
                                help=f"{opt['help']} (default: {opt['default']})")
        else:
            parser.add_argument(*opt["flags"], dest=opt["dest"], type=str, default=None,
                                metavar="X", help=f"{opt['help']} (default: {opt['default']})")


def _parse_config_file(path: str) -> dict[str, str]:
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(lineno, f"expected 'key = value', got {raw.strip()!r}")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _effective(opts, args) -> dict:
    """defaults < config file < explicit flags, with typed conversion."""
    by_dest = {opt["dest"]: opt for opt in opts}
    # Config keys mirror the long flag names ('lambda' as well as 'lam').
    by_name = dict(by_dest)
    for opt in opts:
        for flag in opt["flags"]:
            by_name[flag.lstrip("-").replace("-", "_")] = opt
    values = {dest: opt["default"] for dest, opt in by_dest.items()}
    if args.config is not None:
        for key, raw in _parse_config_file(args.config).items():
            if key not in by_name:
                raise UsageError(f"unknown config key {key!r}")
            opt = by_name[key]
            values[opt["dest"]] = _convert(opt, raw, f"config key {key!r}")
    for dest, opt in by_dest.items():
        given = getattr(args, dest)
        if given is not None:
            values[dest] = _convert(opt, given, opt["flags"][-1])
    return values


def _convert(opt, raw, source: str):
    try:
        return opt["conv"](raw)
    except ValueError as exc:
        raise UsageError(f"bad value for {source}: {exc}") from None


def _config_comments(command: str, values: dict) -> list[str]:
    lines = [f"command = {command}"]
    for key in sorted(values):
        val = values[key]
        if isinstance(val, tuple):
            val = ",".join(str(x) for x in val)
        lines.append(f"{key} = {val}")
    return lines


def _companion(path: str, suffix: str) -> str:
    stem, ext = os.path.splitext(path)
    return f"{stem}{suffix}{ext}"


def _require(values: dict, keys) -> None:
    missing = [k for k in keys if values[k] is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join('--' + k for k in missing)}")


def _distinct_paths(*paths) -> None:
    named = [p for p in paths if p is not None]
    if len(set(named)) != len(named):
        raise UsageError("input and output paths must be distinct")


def _cmd_gen(values: dict) -> int:
    _require(values, ["out"])
    hierarchy = None
    if values["superclass_size"]:
        size, c = values["superclass_size"], values["classes"]
        if c % size != 0:
            raise ValueError("--classes must be divisible by --superclass-size")
        hierarchy = tuple(tuple(range(g, g + size)) for g in range(0, c, size))
    spec = DatasetSpec(
        n_classes=values["classes"], head_count=values["head"],
        imbalance_ratio=values["gamma"], flip_prob=values["psi"],
        feature_dim=values["dim"], class_separation=values["sep"],
        test_per_class=values["test_per_class"], hierarchy=hierarchy,
        seed=values["seed"],
    )
    test_out = values["test_out"] or _companion(values["out"], "_test")
    _distinct_paths(values["out"], test_out, values.get("config"))
    train_ds, test_ds = gen_dataset(spec)
    comments = _config_comments("gen", values)
    write_dataset(train_ds, values["out"], comments)
    write_dataset(test_ds, test_out, comments)
    lo, hi = train_ds.group_boundaries
    print(f"wrote {values['out']} ({train_ds.n_samples} samples) and "
          f"{test_out} ({test_ds.n_samples} samples)")
    print("class counts:", " ".join(str(int(x)) for x in train_ds.class_counts))
    print(f"groups: many=[0,{lo}) medium=[{lo},{hi}) few=[{hi},{spec.n_classes})")
    return 0


def _cmd_train(values: dict) -> int:
    _require(values, ["data"])
    metrics_out = values["metrics_out"] or _companion(values["data"], "_metrics")
    model_out = values["model_out"] or _companion(values["data"], "_model")
    test_path = values["test"]
    if test_path is None:
        candidate = _companion(values["data"], "_test")
        test_path = candidate if os.path.exists(candidate) else None
    _distinct_paths(values["data"], test_path, metrics_out, model_out,
                    values.get("config"))

    ds = read_dataset(values["data"])
    test_ds = read_dataset(test_path) if test_path else None
    cfg = TrainConfig(
        epochs=values["epochs"], batch_size=values["batch"], lr0=values["lr"],
        momentum=values["momentum"], hidden=tuple(values["hidden"]),
        plr=PlrHyperparams(lam=values["lam"], m=values["m"]),
        selection=SelectionConfig(values["rho_start"], values["rho_end"],
                                  values["ramp_epochs"]),
        prior_rule=values["prior_rule"], mu_schedule=(values["mu1"], values["mu2"]),
        pre_epochs=values["pre_epochs"], weak_noise_sigma=values["weak_sigma"],
        strong_noise_sigma=values["strong_sigma"], strong_dropout_p=values["dropout"],
        mixup_alpha=values["mixup_alpha"],
        loss_weights=(values["w_cls"], values["w_cons"], values["w_mix"]),
        solver=values["solver"],
        sinkhorn=SinkhornConfig(values["sk_iters"], values["sk_tol"], values["sk_lambda"]),
        restrict_all_losses=values["restrict_losses"],
        freeze_prior=values["freeze_prior"], timing=values["timing"],
        seed=values["seed"],
    )
    params, metrics, est = train(ds, cfg, test_ds)
    comments = _config_comments("train", values)
    emit_metrics(metrics, metrics_out, comments)
    write_model(params, est.r, model_out, comments)
    if metrics:
        last = metrics[-1]
        print(f"epoch {last.epoch}: loss_cls={last.loss_cls:.4f} "
              f"acc_all={last.acc_all:.2f} acc_few={last.acc_few:.2f}")
    print(f"wrote {metrics_out} and {model_out}")
    return 0


def _cmd_eval(values: dict) -> int:
    _require(values, ["model", "data"])
    out = values["out"] or _companion(values["model"], "_eval")
    _distinct_paths(values["model"], values["data"], out)
    params, prior = read_model(values["model"])
    ds = read_dataset(values["data"])
    logits, _ = forward(params, ds.features)
    preds = logits_adjust_predict(logits, prior, values["phi"])
    acc = group_accuracy(preds, ds.true_labels, ds.group_boundaries)
    summary = (f"phi={values['phi']:.17g} acc_all={acc.overall:.17g} "
               f"acc_many={acc.many:.17g} acc_med={acc.medium:.17g} "
               f"acc_few={acc.few:.17g}")
    with open(out, "w", encoding="ascii", newline="\n") as fh:
        fh.write("plrlab-eval v1\n")
        for line in _config_comments("eval", values):
            fh.write(f"# {line}\n")
        fh.write(summary + "\n")
    print(summary)
    print(f"wrote {out}")
    return 0


def _cmd_bench(values: dict) -> int:
    _require(values, ["out"])
    methods = [m.strip() for m in values["methods"].split(",") if m.strip()]
    records = []
    rng = Rng(values["seed"])
    for classes in values["classes"]:
        for batch in values["batch"]:
            records.extend(bench_pseudo(
                methods, batch, classes, values["reps"], rng.child(len(records)),
                plr_params=PlrHyperparams(lam=values["lam"], m=values["m"]),
                sinkhorn_cfg=SinkhornConfig(max_iters=values["sk_iters"]),
            ))
    emit_bench(records, values["out"], _config_comments("bench", values))
    for rec in records:
        print(f"{rec.method:8s} B={rec.batch_size:<5d} c={rec.n_classes:<4d} "
              f"mean={rec.mean_s:.6f}s std={rec.std_s:.6f}s")
    print(f"wrote {values['out']}")
    return 0


_RUNNERS = {"gen": _cmd_gen, "train": _cmd_train, "eval": _cmd_eval, "bench": _cmd_bench}

_SUBPARSERS: dict[str, argparse.ArgumentParser] = {}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plrlab",
                     description="Long-tailed partial-label learning experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    descriptions = {
        "gen": "generate a seeded synthetic long-tailed partially-labeled dataset",
        "train": "train the classifier with regularized pseudo-labels",
        "eval": "evaluate a trained model with optional prior compensation",
        "bench": "time the pseudo-label update kernels",
    }
    for name, opts in _COMMAND_OPTS.items():
        cmd = sub.add_parser(name, help=descriptions[name], description=descriptions[name])
        _add_options(cmd, opts)
        _SUBPARSERS[name] = cmd
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        values = _effective(_COMMAND_OPTS[args.command], args)
        values["config"] = args.config
        return _RUNNERS[args.command](values)
    except NonFiniteLoss as exc:
        print(f"plrlab {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(_SUBPARSERS[args.command].format_usage(), file=sys.stderr, end="")
        print(f"plrlab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (PlrError, ValueError, OSError) as exc:
        print(f"plrlab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

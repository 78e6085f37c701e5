"""Command-line surface: train, select, approx-check, eval.

Every command is deterministic given its flags and seed. Exit codes:
0 success, 2 usage errors, 3 data or I/O errors, 4 numerical failure.
A ``--config`` file of key=value lines can supply any flag of the chosen
subcommand; explicit command-line flags win. ``--threads`` (or the
RKS_THREADS environment variable) caps the numerical thread pools without
changing results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .data import (
    DataFormatError,
    load_dataset,
    median_pairwise_distance,
    split_heldout,
)
from .features import sample_projection_bank
from .kernels import KernelFamily, KernelSpec
from .model import Bottleneck, DivergenceError, init_model, load_model
from .oracle import DEFAULT_CAP, approximation_report
from .selection import SelectionCriterion, export_trace, load_trace, select_checkpoint, selection_summary
from .training import TrainConfig, TrainingDiverged, evaluate_checkpoint, train

_KERNELS = {"rbf": KernelFamily.GAUSSIAN_RBF, "lap": KernelFamily.LAPLACIAN}


def _sigma_arg(value: str):
    if value == "auto":
        return "auto"
    try:
        sigma = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"sigma must be 'auto' or a positive real, got {value!r}")
    if not sigma > 0.0:
        raise argparse.ArgumentTypeError(f"sigma must be positive, got {value}")
    return sigma


def _bottleneck_arg(value: str):
    if value == "none":
        return None
    kind, sep, width = value.partition(":")
    if kind not in ("linear", "sigmoid") or not sep:
        raise argparse.ArgumentTypeError(f"bottleneck must be none, linear:W, or sigmoid:W, got {value!r}")
    try:
        return Bottleneck(kind, int(width))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _feature_list_arg(value: str):
    try:
        counts = [int(v) for v in value.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated feature counts, got {value!r}")
    if not counts or any(c < 1 for c in counts):
        raise argparse.ArgumentTypeError(f"feature counts must be positive integers, got {value!r}")
    return counts


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="rks", description="Random-kitchen-sinks acoustic model toolkit"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def common(sub):
        sub.add_argument("--config", help="key=value file supplying defaults for any flag")
        sub.add_argument("--threads", type=int, default=None, help="cap numerical thread pools")
        sub.add_argument("--seed", type=int, default=0)

    p = subs["train"] = subparsers.add_parser("train", help="train a model, writing a run directory")
    common(p)
    p.add_argument("--data", required=True, help="dataset file (.frds or .csv)")
    p.add_argument("--kernel", choices=sorted(_KERNELS), default="rbf")
    p.add_argument("--sigma", type=_sigma_arg, default="auto", help="bandwidth, or 'auto' for the median heuristic")
    p.add_argument("--sigma-mult", type=float, default=1.0, help="multiplier on the auto bandwidth")
    p.add_argument("--features", type=int, default=25000, help="number of random features")
    p.add_argument("--bottleneck", type=_bottleneck_arg, default=None, help="none | linear:W | sigmoid:W")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--anneal", type=float, default=0.5, help="learning-rate factor on non-improving epochs")
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--minibatch", type=int, default=250)
    p.add_argument("--heldout-fraction", type=float, default=0.1)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--cache-features", action="store_true", help="precompute training features once")
    p.add_argument("--out", required=True, help="run directory for checkpoints and trace.csv")

    p = subs["select"] = subparsers.add_parser("select", help="pick a checkpoint from a run's trace")
    common(p)
    p.add_argument("--run", required=True, help="run directory containing trace.csv")
    p.add_argument("--criterion", choices=[c.value for c in SelectionCriterion], required=True)

    p = subs["approx-check"] = subparsers.add_parser(
        "approx-check", help="feature-approximation error vs the exact kernel"
    )
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--kernel", choices=sorted(_KERNELS), default="rbf")
    p.add_argument("--sigma", type=_sigma_arg, default="auto")
    p.add_argument("--sigma-mult", type=float, default=1.0)
    p.add_argument("--features", type=_feature_list_arg, required=True, help="comma-separated D values")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="max dataset rows for the exact oracle")
    p.add_argument("--out", default=None, help="report CSV path (stdout when omitted)")

    p = subs["eval"] = subparsers.add_parser("eval", help="metrics of a checkpoint on a dataset")
    common(p)
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--data", required=True)

    return parser, subs


def _apply_config_file(parser: argparse.ArgumentParser, sub: argparse.ArgumentParser, path: str) -> None:
    """Install key=value file entries as subcommand defaults."""
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    defaults = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep or key not in actions:
            parser.error(f"{path}: line {lineno}: unknown config entry {line!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes")
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"{path}: line {lineno}: {exc}")
        else:
            defaults[key] = value
        if action.choices is not None and defaults[key] not in action.choices:
            parser.error(f"{path}: line {lineno}: {value!r} not one of {sorted(action.choices)}")
    sub.set_defaults(**defaults)


def _limit_threads(threads: int | None) -> None:
    if threads is None:
        env = os.environ.get("RKS_THREADS")
        threads = int(env) if env else None
    if threads is not None:
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=threads)


def _resolve_sigma(args, dataset) -> float:
    if args.sigma == "auto":
        return args.sigma_mult * median_pairwise_distance(dataset, subsample=2000, seed=args.seed + 4)
    return float(args.sigma)


def _split_for_training(dataset, fraction: float, seed: int):
    """Held-out split clamped so both sides keep at least one frame."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"heldout fraction must lie in (0, 1), got {fraction}")
    n = dataset.num_frames
    if n < 2:
        raise ValueError("need at least 2 frames to split off a held-out set")
    n_held = min(max(1, int(round(fraction * n))), n - 1)
    return split_heldout(dataset, n_held / n, seed=seed)


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)
    sigma = _resolve_sigma(args, dataset)
    print(f"sigma={sigma!r}")
    _write_resolved_config(args, sigma)
    train_set, heldout = _split_for_training(dataset, args.heldout_fraction, args.seed + 3)
    spec = KernelSpec(_KERNELS[args.kernel], sigma)
    bank = sample_projection_bank(spec, dataset.dim, args.features, seed=args.seed)
    model = init_model(
        bank.num_features, dataset.num_classes, bottleneck=args.bottleneck, seed=args.seed + 1, bank=bank
    )
    config = TrainConfig(
        learning_rate=args.lr,
        max_epochs=args.epochs,
        minibatch_size=args.minibatch,
        momentum=args.momentum,
        anneal_factor=args.anneal,
        l2=args.l2,
        seed=args.seed + 2,
        eval_every=args.eval_every,
    )
    trace_path = os.path.join(args.out, "trace.csv")
    try:
        trace = train(
            bank, model, train_set, heldout, config, run_dir=args.out, cache_features=args.cache_features
        )
    except TrainingDiverged as exc:
        export_trace(exc.trace, trace_path)
        print(f"error: {exc}", file=sys.stderr)
        return 4
    export_trace(trace, trace_path)
    print(f"trace={trace_path}")
    return 0


def _write_resolved_config(args, sigma: float) -> None:
    skip = {"command", "config", "func"}
    resolved = {k: v for k, v in vars(args).items() if k not in skip}
    resolved["sigma"] = sigma
    if resolved.get("bottleneck") is not None:
        b = resolved["bottleneck"]
        resolved["bottleneck"] = f"{b.kind}:{b.width}"
    else:
        resolved["bottleneck"] = "none"
    lines = [f"{key}={resolved[key]}" for key in sorted(resolved)]
    with open(os.path.join(args.out, "config.resolved"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_select(args) -> int:
    trace = load_trace(os.path.join(args.run, "trace.csv"))
    entry = select_checkpoint(trace, SelectionCriterion(args.criterion))
    print(json.dumps(selection_summary(entry)))
    return 0


def cmd_approx_check(args) -> int:
    dataset = load_dataset(args.data)
    if dataset.num_frames > args.cap:
        raise DataFormatError(
            f"{dataset.num_frames} frames exceeds the exact-kernel cap of {args.cap}"
        )
    sigma = _resolve_sigma(args, dataset)
    spec = KernelSpec(_KERNELS[args.kernel], sigma)
    rows = approximation_report(
        spec,
        dataset.features.astype("float64"),
        feature_counts=args.features,
        num_pairs=args.pairs,
        seed=args.seed,
    )
    lines = ["D,rms_error,max_error"]
    lines += [f"{d},{rms!r},{mx!r}" for d, rms, mx in rows]
    report = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(report)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(report)
        print(f"report={args.out}")
    return 0


def cmd_eval(args) -> int:
    model, bank = load_model(args.model)
    dataset = load_dataset(args.data)
    record = evaluate_checkpoint(bank, model, dataset)
    print(
        json.dumps(
            {
                "perplexity": record.perplexity,
                "accuracy": record.accuracy,
                "mean_entropy": record.mean_entropy,
                "erp": record.erp,
                "num_frames": record.num_frames,
            }
        )
    )
    return 0


_COMMANDS = {
    "train": cmd_train,
    "select": cmd_select,
    "approx-check": cmd_approx_check,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    config_path = None
    for at, token in enumerate(argv):
        if token == "--config":
            if at + 1 >= len(argv):
                parser.error("--config needs a file path")
            config_path = argv[at + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path is not None:
        command = argv[0] if argv and argv[0] in subs else None
        if command is None:
            parser.error("--config requires a subcommand")
        _apply_config_file(parser, subs[command], config_path)
    args = parser.parse_args(argv)
    try:
        _limit_threads(args.threads)
        return _COMMANDS[args.command](args)
    except TrainingDiverged as exc:  # train handles its own; safety net
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (DataFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

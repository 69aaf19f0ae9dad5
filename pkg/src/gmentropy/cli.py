"""Command-line interface: one binary, one subcommand per task.

Tabular results go to CSV (17-significant-digit floats, round-trip exact),
structured reports to JSON. Every stochastic subcommand takes an explicit
seed; nothing reads global RNG state or environment variables.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import bnn, bounds, entropy, experiments
from .mixture import (
    GaussianMixture,
    NumericalError,
    UnsupportedConfiguration,
    mixture_from_json,
)

_FMT = ".17g"


def _fmt(x) -> str:
    return format(float(x), _FMT)


def _load_mixture(path: str) -> GaussianMixture:
    with open(path) as fh:
        return mixture_from_json(fh.read())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_entropy_compare(args) -> int:
    q = _load_mixture(args.mixture)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["method", "value", "std_error", "n"])
    for token in args.methods.split(","):
        name, _, arg = token.strip().partition(":")
        if name == "ours":
            est = entropy.entropy_ours(q)
        elif name == "huber0":
            est = entropy.entropy_huber(q, 0)
        elif name == "huber2":
            est = entropy.entropy_huber(q, 2)
        elif name == "bonilla":
            est = entropy.entropy_bonilla(q)
        elif name == "mc":
            est = entropy.entropy_mc(q, int(arg) if arg else 1000, args.seed)
        elif name == "gh":
            est = entropy.entropy_exact_k2(q, int(arg) if arg else 100)
        else:
            raise ValueError(f"unknown method {name!r}")
        writer.writerow([
            est.method, _fmt(est.value),
            "" if est.std_error is None else _fmt(est.std_error),
            "" if est.n_samples is None else est.n_samples,
        ])
    return 0


def _cmd_bounds(args) -> int:
    q = _load_mixture(args.mixture)
    if args.s == "auto":
        s = None
    else:
        s = float(args.s)
        if not (0.0 < s < 1.0):
            raise ValueError(f"--s must lie in the open interval (0, 1), got {s}")
    if args.variant == "shared":
        report = bounds.error_bounds_shared(q, s)
    else:
        report = bounds.error_bounds_general(
            q, s, use_alpha_set=(args.alpha == "set"),
            n_c=args.c_samples, seed=args.seed)
    doc = {
        "lower": report.lower,
        "upper": report.upper,
        "s_used": report.s_used,
        "variant": report.variant,
        "alpha_pairwise": report.alpha.pairwise.tolist(),
        "alpha_set_based": None if report.alpha.set_based is None
        else report.alpha.set_based.tolist(),
        "c_values": report.c_values.tolist(),
        "c_std_errors": None if report.c_std_errors is None
        else report.c_std_errors.tolist(),
        "c_exact": report.c_exact,
    }
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    cfg = experiments.SweepConfig(
        dims=tuple(raw.get("dims", experiments.DESK_DIMS)),
        c=raw.get("c", 0.1),
        weights=tuple(raw.get("weights", (0.5, 0.5))),
        n_trials=raw.get("n_trials", 50),
        methods=tuple(raw.get("methods", experiments.DEFAULT_METHODS)),
        seed=raw.get("seed", args.seed),
        mc_points=raw.get("mc_points", 1000),
    )
    if args.full_scale:
        cfg.dims = experiments.FULL_DIMS
        cfg.n_trials = 500
    records = experiments.run_relative_error_sweep(cfg)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    with open(csv_path, "w") as fh:
        fh.write(experiments.sweep_records_to_csv(records))
    experiments.render_sweep_figure(records, os.path.join(args.out, "sweep.svg"))
    print(csv_path)
    return 0


def _cmd_prob_check(args) -> int:
    if not (0.0 < args.s < 1.0):
        raise ValueError(f"--s must lie in the open interval (0, 1), got {args.s}")
    result = experiments.run_probabilistic_check(
        K=args.K, m=args.m, c=args.c, eps=args.eps, s=args.s,
        n_trials=args.trials, seed=args.seed)
    json.dump(result, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_dataset(args) -> int:
    x, y = bnn.generate_dataset(args.n, noise_std=args.noise_std, seed=args.seed)
    with open(args.out, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y"])
        for xi, yi in zip(x, y):
            writer.writerow([_fmt(xi), _fmt(yi)])
    print(args.out)
    return 0


def _cmd_train(args) -> int:
    if args.data:
        xs, ys = [], []
        with open(args.data) as fh:
            for row in csv.DictReader(fh):
                xs.append(float(row["x"]))
                ys.append(float(row["y"]))
        x, y = np.array(xs), np.array(ys)
    else:
        x, y = bnn.generate_dataset(args.n, seed=args.seed)
    spec = bnn.MLPSpec()
    cfg = bnn.TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                          prior_std=args.sigma_w, likelihood_std=args.sigma_y,
                          K=args.K, seed=args.seed, optimizer=args.optimizer)
    posterior, trace = bnn.train(spec, cfg, x, y)
    with open(args.out, "w") as fh:
        fh.write(bnn.model_to_json(spec, posterior, cfg.likelihood_std))
    if trace.size:
        print(f"final objective {_fmt(trace[-1])} after {len(trace)} epochs")
    print(args.out)
    return 0


def _parse_grid(text: str) -> np.ndarray:
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ValueError("grid needs step > 0 and stop >= start")
    n = int(round((stop - start) / step))
    return start + step * np.arange(n + 1)


def _cmd_predict(args) -> int:
    with open(args.model) as fh:
        spec, posterior, sigma_y = bnn.model_from_json(fh.read())
    xs = _parse_grid(args.grid)
    mean, std, comp_means = bnn.predict(posterior, spec, xs, args.samples,
                                        args.seed, sigma_y)
    with open(args.out, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        K = posterior.n_components
        writer.writerow(["x", "mean", "std"] + [f"comp_mean_{k}" for k in range(K)])
        for i, xi in enumerate(xs):
            writer.writerow([_fmt(xi), _fmt(mean[i]), _fmt(std[i])]
                            + [_fmt(comp_means[k, i]) for k in range(K)])
    print(args.out)
    return 0


# ---------------------------------------------------------------------------
# parser / dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmentropy",
        description="Gaussian-mixture entropy approximations, error bounds, "
                    "and mixture-posterior network training.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap on internal worker count (computation is "
                             "deterministic regardless)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy-compare", help="evaluate entropy methods on a mixture")
    p.add_argument("--mixture", required=True)
    p.add_argument("--methods", default="ours,huber0,bonilla,mc:1000")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_entropy_compare)

    p = sub.add_parser("bounds", help="approximation-error bounds for a mixture")
    p.add_argument("--mixture", required=True)
    p.add_argument("--s", default="auto", help="sharpness in (0,1) or 'auto'")
    p.add_argument("--alpha", choices=["pair", "set"], default="pair")
    p.add_argument("--variant", choices=["general", "shared"], default="general")
    p.add_argument("--c-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("sweep", help="relative-error sweep over dimension")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full-scale", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("prob-check", help="empirical tail probability vs bound")
    p.add_argument("--K", type=int, default=2)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_prob_check)

    p = sub.add_parser("dataset", help="sample the noisy x sin(x) regression set")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("train", help="train the mixture-posterior regressor")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--sigma-w", type=float, default=1e6)
    p.add_argument("--sigma-y", type=float, default=1e-2)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default=None, help="CSV with x,y columns; "
                   "generated when omitted")
    p.add_argument("--n", type=int, default=20, help="dataset size when generating")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predictive mean/std on a grid")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", default="-6:6:0.05", help="start:stop:step")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    # fold "--grid -6:6:0.05" into one token so the leading '-' of a negative
    # grid start is not mistaken for an option
    argv = list(argv)
    for i, tok in enumerate(argv[:-1]):
        if tok == "--grid":
            argv[i:i + 2] = [f"--grid={argv[i + 1]}"]
            break
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, UnsupportedConfiguration, NumericalError, OSError,
            KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

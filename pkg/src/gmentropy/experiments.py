"""Relative-error sweep and tail-probability simulation for the K=2 case.

The sweep draws random two-component mixtures with identity covariance and a
Gaussian mean gap, scores every approximation against the Gauss-Hermite
ground truth, and aggregates relative errors per dimension. The tail check
measures how often the approximation error exceeds a threshold and compares
the frequency with the analytic bound.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .bounds import probabilistic_bound_rhs
from .entropy import (
    entropy_bonilla,
    entropy_exact_k2,
    entropy_huber,
    entropy_mc,
    entropy_ours,
)
from .mixture import Covariance, GaussianComponent, GaussianMixture

__all__ = [
    "SweepConfig",
    "SweepRecord",
    "run_relative_error_sweep",
    "sweep_records_to_csv",
    "render_sweep_figure",
    "run_probabilistic_check",
]

DESK_DIMS = (1, 2, 5, 10, 20, 50, 100, 200)
FULL_DIMS = (1, 2, 5, 10, 20, 50, 100, 200, 300, 400, 500)
DEFAULT_METHODS = ("ours", "huber0", "huber2", "bonilla", "mc")
_GH_NODES = 100


@dataclass
class SweepConfig:
    dims: tuple = DESK_DIMS
    c: float = 0.1
    weights: tuple = (0.5, 0.5)
    n_trials: int = 50
    methods: tuple = DEFAULT_METHODS
    seed: int = 0
    mc_points: int = 1000

    def __post_init__(self):
        self.dims = tuple(self.dims)
        if not self.dims or list(self.dims) != sorted(self.dims):
            raise ValueError("dims must be nonempty and ascending")
        if abs(sum(self.weights) - 1.0) > 1e-12 or len(self.weights) != 2:
            raise ValueError("weights must be two values summing to 1")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


@dataclass
class SweepRecord:
    m: int
    method: str
    mean_rel_err: float
    min_rel_err: float
    max_rel_err: float
    n_trials: int


def _trial_mixture(m: int, c: float, weights, rng) -> GaussianMixture:
    """K=2, identity covariance, mu_1 = 0, mu_2 ~ N(0, (2c)^2 I)."""
    mu2 = 2.0 * c * rng.standard_normal(m)
    cov = Covariance.isotropic(m, 1.0)
    return GaussianMixture([
        GaussianComponent(mean=np.zeros(m), cov=cov, weight=weights[0]),
        GaussianComponent(mean=mu2, cov=cov, weight=weights[1]),
    ])


def _method_value(method: str, q: GaussianMixture, mc_points: int, seed: int) -> float:
    if method == "ours":
        return entropy_ours(q).value
    if method == "huber0":
        return entropy_huber(q, 0).value
    if method == "huber2":
        return entropy_huber(q, 2).value
    if method == "bonilla":
        return entropy_bonilla(q).value
    if method == "mc":
        return entropy_mc(q, mc_points, seed).value
    raise ValueError(f"unknown sweep method {method!r}")


def run_relative_error_sweep(cfg: SweepConfig) -> list[SweepRecord]:
    """Relative error |H - H_method| / |H| per dimension, aggregated over trials.

    Ground truth H comes from the Gauss-Hermite reduction, never from Monte
    Carlo. Per-trial seeds derive from the config seed, so the output is a
    deterministic function of the config.
    """
    records = []
    ss = np.random.SeedSequence(cfg.seed)
    dim_seeds = ss.spawn(len(cfg.dims))
    for m, dim_ss in zip(cfg.dims, dim_seeds):
        errs = {method: np.empty(cfg.n_trials) for method in cfg.methods}
        trial_seeds = dim_ss.generate_state(2 * cfg.n_trials, dtype=np.uint64)
        for t in range(cfg.n_trials):
            rng = np.random.Generator(np.random.Philox(key=int(trial_seeds[2 * t])))
            q = _trial_mixture(m, cfg.c, cfg.weights, rng)
            truth = entropy_exact_k2(q, n_nodes=_GH_NODES).value
            for method in cfg.methods:
                val = _method_value(method, q, cfg.mc_points, int(trial_seeds[2 * t + 1]))
                errs[method][t] = abs(truth - val) / abs(truth)
        for method in cfg.methods:
            e = errs[method]
            records.append(SweepRecord(
                m=m, method=method,
                mean_rel_err=float(e.mean()),
                min_rel_err=float(e.min()),
                max_rel_err=float(e.max()),
                n_trials=cfg.n_trials,
            ))
    return records


def sweep_records_to_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "method", "mean_rel_err", "min_rel_err", "max_rel_err", "n_trials"])
    for r in records:
        writer.writerow([
            r.m, r.method,
            format(r.mean_rel_err, ".17g"),
            format(r.min_rel_err, ".17g"),
            format(r.max_rel_err, ".17g"),
            r.n_trials,
        ])
    return buf.getvalue()


def render_sweep_figure(records: list[SweepRecord], path: str):
    """Line chart of mean relative error per method over dimension (log y)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    methods = []
    for r in records:
        if r.method not in methods:
            methods.append(r.method)
    fig, ax = plt.subplots(figsize=(7, 5))
    for method in methods:
        rows = [r for r in records if r.method == method]
        ms = [r.m for r in rows]
        ax.plot(ms, [r.mean_rel_err for r in rows], marker="o", label=method)
        ax.fill_between(ms, [max(r.min_rel_err, 1e-300) for r in rows],
                        [r.max_rel_err for r in rows], alpha=0.15)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("dimension m")
    ax.set_ylabel("relative error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run_probabilistic_check(K: int, m: int, c: float, eps: float, s: float,
                            n_trials: int, seed: int) -> dict:
    """Empirical exceedance frequency of |H - H_ours| >= eps vs the analytic bound.

    Mean gaps follow the assumed Gaussian law (the half whitened gap has
    standard deviation c per coordinate); ground truth is the Gauss-Hermite
    value, so only K=2 with a shared identity covariance is supported.
    """
    if K != 2:
        raise ValueError("the exceedance check needs K = 2 for exact ground truth")
    rhs = probabilistic_bound_rhs("shared", K, m, c, s, eps)
    ss = np.random.SeedSequence(seed)
    trial_seeds = ss.generate_state(n_trials, dtype=np.uint64)
    exceed = 0
    for t in range(n_trials):
        rng = np.random.Generator(np.random.Philox(key=int(trial_seeds[t])))
        q = _trial_mixture(m, c, (0.5, 0.5), rng)
        err = abs(entropy_exact_k2(q, n_nodes=_GH_NODES).value - entropy_ours(q).value)
        exceed += err >= eps
    p_hat = exceed / n_trials
    return {
        "empirical_prob": p_hat,
        "rhs": rhs,
        "std_error": float(np.sqrt(p_hat * (1 - p_hat) / n_trials)),
        "n_trials": n_trials,
        "K": K, "m": m, "c": c, "eps": eps, "s": s,
    }

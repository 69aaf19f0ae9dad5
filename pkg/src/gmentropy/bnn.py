"""Variational regression with a Gaussian-mixture posterior over MLP weights.

The network is a small erf-activated MLP evaluated on a flat weight vector.
The objective is the weighted sum of per-component single-Gaussian evidence
lower bounds plus the entropy of the mixing weights: reparameterized
log-likelihood, closed-form cross-entropy against an isotropic prior, and the
closed-form per-component entropy. Gradients are accumulated by hand in
reverse mode; no autodiff framework is involved.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .mixture import NumericalError

__all__ = [
    "MLPSpec",
    "VariationalPosterior",
    "TrainConfig",
    "mlp_forward",
    "generate_dataset",
    "elbo",
    "elbo_gradient",
    "train",
    "predict",
    "model_to_json",
    "model_from_json",
]

_LOG_2PI = np.log(2 * np.pi)
_ERF_SCALE = 2.0 / np.sqrt(np.pi)


@dataclass(frozen=True)
class MLPSpec:
    """Fully connected erf-activated network acting on flat weight vectors.

    Weights pack layer by layer, each layer as the row-major weight matrix
    followed by the bias vector.
    """
    input_dim: int = 1
    hidden: tuple = (8, 8)
    output_dim: int = 1

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.input_dim, *self.hidden, self.output_dim]
        return [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]

    @property
    def weight_count(self) -> int:
        return sum((fi + 1) * fo for fi, fo in self.layer_dims)


def _unpack(spec: MLPSpec, w: np.ndarray):
    """Split a flat weight vector into [(W, b)] per layer."""
    layers = []
    pos = 0
    for fan_in, fan_out in spec.layer_dims:
        wmat = w[pos:pos + fan_in * fan_out].reshape(fan_out, fan_in)
        pos += fan_in * fan_out
        b = w[pos:pos + fan_out]
        pos += fan_out
        layers.append((wmat, b))
    return layers


def mlp_forward(spec: MLPSpec, w: np.ndarray, x: np.ndarray, cache: list | None = None):
    """Evaluate the network on inputs x (n,) or (n, input_dim).

    When `cache` is a list, activations and pre-activations are appended for a
    later reverse pass.
    """
    x = np.asarray(x, dtype=float)
    a = x[:, None] if x.ndim == 1 else x
    layers = _unpack(spec, np.asarray(w, dtype=float))
    last = len(layers) - 1
    for i, (wmat, b) in enumerate(layers):
        if cache is not None:
            cache.append(a)
        z = a @ wmat.T + b
        a = z if i == last else erf(z)
        if cache is not None and i < last:
            cache.append(z)
    return a[:, 0] if spec.output_dim == 1 else a


def mlp_backward(spec: MLPSpec, w: np.ndarray, cache: list, out_grad: np.ndarray) -> np.ndarray:
    """Gradient of sum_i out_grad[i] * f(x_i; w) with respect to the flat w."""
    layers = _unpack(spec, np.asarray(w, dtype=float))
    g = out_grad[:, None] if out_grad.ndim == 1 else out_grad
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        if i == len(layers) - 1:
            a_in = cache[2 * i]
        else:
            a_in, z = cache[2 * i], cache[2 * i + 1]
            g = g * (_ERF_SCALE * np.exp(-z * z))
        wmat, _ = layers[i]
        grads[i] = (g.T @ a_in, g.sum(axis=0))
        g = g @ wmat
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    return float(np.log(np.expm1(y)))


def _softmax(logits):
    top = logits.max()
    e = np.exp(logits - top)
    return e / e.sum()


class VariationalPosterior:
    """K diagonal-Gaussian components over the flat weight space.

    Free parameters: per-component means, pre-softplus scales, and mixing
    logits. The simplex and positivity constraints hold by construction.
    """

    def __init__(self, mus: np.ndarray, rhos: np.ndarray, logits: np.ndarray):
        self.mus = np.asarray(mus, dtype=float)
        self.rhos = np.asarray(rhos, dtype=float)
        self.logits = np.asarray(logits, dtype=float)
        if self.mus.shape != self.rhos.shape or self.mus.ndim != 2:
            raise ValueError("mus and rhos must share shape (K, m)")
        if self.logits.shape != (self.mus.shape[0],):
            raise ValueError("logits must have one entry per component")

    @property
    def n_components(self) -> int:
        return self.mus.shape[0]

    @property
    def weight_dim(self) -> int:
        return self.mus.shape[1]

    @property
    def sigmas(self) -> np.ndarray:
        return _softplus(self.rhos)

    @property
    def weights(self) -> np.ndarray:
        return _softmax(self.logits)

    def copy(self) -> "VariationalPosterior":
        return VariationalPosterior(self.mus.copy(), self.rhos.copy(), self.logits.copy())


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.05
    prior_std: float = 1e6
    likelihood_std: float = 1e-2
    K: int = 5
    seed: int = 0
    optimizer: str = "adam"
    batch_size: int | None = None  # None = full batch

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0:
            raise ValueError("epochs must be >= 0 and learning_rate positive")
        if self.prior_std <= 0 or self.likelihood_std <= 0 or self.K < 1:
            raise ValueError("prior_std, likelihood_std must be positive and K >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


def generate_dataset(n: int, noise_std: float = 0.1, x_range=(-6.0, 6.0), seed: int = 0):
    """n points from y = x sin(x) + noise, x uniform on x_range."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    x = rng.uniform(x_range[0], x_range[1], size=n)
    y = x * np.sin(x) + noise_std * rng.standard_normal(n)
    return x, y


def _per_component_terms(posterior, spec, x, y, full_n, eps, prior_std, lik_std,
                         caches=None):
    """A_k = likelihood + cross-entropy + entropy for each component."""
    sigmas = posterior.sigmas
    m = posterior.weight_dim
    n_batch = x.shape[0]
    a_vals = np.empty(posterior.n_components)
    preds = []
    for k in range(posterior.n_components):
        w = sigmas[k] * eps + posterior.mus[k]
        cache = [] if caches is not None else None
        f = mlp_forward(spec, w, x, cache=cache)
        lik = (full_n / n_batch) * float(
            np.sum(-0.5 * np.log(2 * np.pi * lik_std**2)
                   - (y - f) ** 2 / (2 * lik_std**2)))
        cross = -0.5 * (m * _LOG_2PI + 2 * m * np.log(prior_std)
                        + (np.sum(sigmas[k] ** 2) + np.sum(posterior.mus[k] ** 2))
                        / prior_std**2)
        ent = 0.5 * m * (1 + _LOG_2PI) + float(np.sum(np.log(sigmas[k])))
        a_vals[k] = lik + cross + ent
        preds.append(f)
        if caches is not None:
            caches.append(cache)
    return a_vals, preds


def elbo(posterior: VariationalPosterior, spec: MLPSpec, x, y, full_n: int,
         eps: np.ndarray, prior_std: float, lik_std: float) -> float:
    """Mixture evidence lower bound for one shared reparameterization draw eps."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if eps.shape != (posterior.weight_dim,):
        raise ValueError("eps must match the flat weight dimension")
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    pis = posterior.weights
    a_vals, _ = _per_component_terms(posterior, spec, x, y, full_n, eps,
                                     prior_std, lik_std)
    return float(pis @ (a_vals - np.log(pis)))


def elbo_gradient(posterior: VariationalPosterior, spec: MLPSpec, x, y,
                  full_n: int, eps: np.ndarray, prior_std: float, lik_std: float):
    """Exact gradient of `elbo` (eps held fixed) over (mus, rhos, logits)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pis = posterior.weights
    sigmas = posterior.sigmas
    n_batch = x.shape[0]
    caches = []
    a_vals, preds = _per_component_terms(posterior, spec, x, y, full_n, eps,
                                         prior_std, lik_std, caches=caches)
    grad_mu = np.empty_like(posterior.mus)
    grad_rho = np.empty_like(posterior.rhos)
    for k in range(posterior.n_components):
        w = sigmas[k] * eps + posterior.mus[k]
        out_grad = (full_n / n_batch) * (y - preds[k]) / lik_std**2
        dlik_dw = mlp_backward(spec, w, caches[k], out_grad)
        dmu = dlik_dw - posterior.mus[k] / prior_std**2
        dsigma = dlik_dw * eps - sigmas[k] / prior_std**2 + 1.0 / sigmas[k]
        grad_mu[k] = pis[k] * dmu
        # softplus Jacobian: dsigma/drho = logistic(rho)
        grad_rho[k] = pis[k] * dsigma / (1.0 + np.exp(-posterior.rhos[k]))
    b_vals = a_vals - np.log(pis)
    grad_logits = pis * (b_vals - pis @ b_vals)
    return grad_mu, grad_rho, grad_logits


def _init_posterior(spec: MLPSpec, K: int, seed_seq) -> VariationalPosterior:
    """Layer-scaled Gaussian means, sigma = 0.05, uniform mixing logits."""
    m = spec.weight_count
    mus = np.empty((K, m))
    children = seed_seq.spawn(K)
    for k in range(K):
        rng = np.random.Generator(np.random.Philox(key=children[k].generate_state(1)[0]))
        pos = 0
        for fan_in, fan_out in spec.layer_dims:
            size = (fan_in + 1) * fan_out
            mus[k, pos:pos + size] = rng.standard_normal(size) / np.sqrt(fan_in)
            pos += size
    rhos = np.full((K, m), _softplus_inv(0.05))
    return VariationalPosterior(mus, rhos, np.zeros(K))


def train(spec: MLPSpec, cfg: TrainConfig, x, y):
    """Full-batch stochastic-gradient ascent on the mixture lower bound.

    One fresh reparameterization draw per epoch, shared by all components.
    Returns (posterior, per-epoch objective trace).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    full_n = x.shape[0]
    batch = full_n if cfg.batch_size is None else min(cfg.batch_size, full_n)
    ss = np.random.SeedSequence(cfg.seed)
    init_ss, noise_ss = ss.spawn(2)
    posterior = _init_posterior(spec, cfg.K, init_ss)
    rng = np.random.Generator(np.random.Philox(key=noise_ss.generate_state(1)[0]))
    m = spec.weight_count

    adam_m = [np.zeros_like(posterior.mus), np.zeros_like(posterior.rhos),
              np.zeros_like(posterior.logits)]
    adam_v = [np.zeros_like(g) for g in adam_m]
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    trace = []
    for step in range(cfg.epochs):
        if batch < full_n:
            idx = rng.choice(full_n, size=batch, replace=False)
            xb, yb = x[idx], y[idx]
        else:
            xb, yb = x, y
        eps = rng.standard_normal(m)
        value = elbo(posterior, spec, xb, yb, full_n, eps, cfg.prior_std,
                     cfg.likelihood_std)
        grads = elbo_gradient(posterior, spec, xb, yb, full_n, eps,
                              cfg.prior_std, cfg.likelihood_std)
        params = [posterior.mus, posterior.rhos, posterior.logits]
        if not np.isfinite(value) or any(not np.isfinite(g).all() for g in grads):
            norms = [float(np.linalg.norm(p)) for p in params]
            raise NumericalError(
                f"non-finite objective or gradient at step {step} "
                f"(objective {value}, parameter norms {norms})")
        if cfg.optimizer == "adam":
            t = step + 1
            for p, g, mom, vel in zip(params, grads, adam_m, adam_v):
                mom += (1 - beta1) * (g - mom)
                vel += (1 - beta2) * (g * g - vel)
                mhat = mom / (1 - beta1**t)
                vhat = vel / (1 - beta2**t)
                p += cfg.learning_rate * mhat / (np.sqrt(vhat) + adam_eps)
        else:
            for p, g in zip(params, grads):
                p += cfg.learning_rate * g
        trace.append(value)
    return posterior, np.array(trace)


def predict(posterior: VariationalPosterior, spec: MLPSpec, xs, n_samples: int,
            seed: int, lik_std: float):
    """Predictive mean/std on a grid by sampling weights per component.

    Returns (mean, std, comp_means) with comp_means of shape (K, len(xs));
    variance composes the mixture moments and adds the observation noise.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    xs = np.asarray(xs, dtype=float)
    pis = posterior.weights
    sigmas = posterior.sigmas
    K = posterior.n_components
    rng = np.random.Generator(np.random.Philox(key=seed))
    comp_mean = np.empty((K, xs.shape[0]))
    comp_second = np.empty((K, xs.shape[0]))
    for k in range(K):
        z = rng.standard_normal((n_samples, posterior.weight_dim))
        fs = np.stack([
            mlp_forward(spec, posterior.mus[k] + sigmas[k] * z[j], xs)
            for j in range(n_samples)
        ])
        comp_mean[k] = fs.mean(axis=0)
        comp_second[k] = np.mean(fs * fs, axis=0)
    mean = pis @ comp_mean
    var = pis @ comp_second - mean**2 + lik_std**2
    return mean, np.sqrt(np.maximum(var, 0.0)), comp_mean


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def model_to_json(spec: MLPSpec, posterior: VariationalPosterior, lik_std: float) -> str:
    doc = {
        "spec": {"input_dim": spec.input_dim, "hidden": list(spec.hidden),
                 "output_dim": spec.output_dim},
        "posterior": {"mus": posterior.mus.tolist(), "rhos": posterior.rhos.tolist(),
                      "logits": posterior.logits.tolist()},
        "sigma_y": lik_std,
    }
    return json.dumps(doc)


def model_from_json(text: str):
    doc = json.loads(text)
    spec = MLPSpec(input_dim=doc["spec"]["input_dim"],
                   hidden=tuple(doc["spec"]["hidden"]),
                   output_dim=doc["spec"]["output_dim"])
    p = doc["posterior"]
    posterior = VariationalPosterior(np.asarray(p["mus"]), np.asarray(p["rhos"]),
                                     np.asarray(p["logits"]))
    return spec, posterior, float(doc["sigma_y"])

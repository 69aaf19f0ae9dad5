"""Entropy estimators and approximations for Gaussian mixtures.

All values are in nats. Deterministic approximations: the per-component
closed form (``ours``), the Taylor-expansion forms of order 0 and 2
(``huber0``/``huber2``), and the Jensen lower bound (``bonilla``). Oracles:
plain Monte Carlo, the K=2 shared-covariance Gauss-Hermite reduction, and
the reduced-dimension Monte Carlo form for shared covariances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixture import GaussianMixture, UnsupportedConfiguration, log_density, sample
from .quadrature import gauss_hermite

__all__ = [
    "EntropyEstimate",
    "entropy_ours",
    "entropy_huber",
    "entropy_bonilla",
    "entropy_mc",
    "entropy_exact_k2",
    "entropy_reduced_mc",
]

_LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    method: str
    std_error: float | None = None
    n_samples: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"entropy estimate is not finite: {self.value}")


def entropy_ours(q: GaussianMixture) -> EntropyEstimate:
    """Sum of per-component Gaussian entropies plus the weight entropy.

    m/2 + (m/2) log 2pi + (1/2) sum_k pi_k log|Sigma_k| - sum_k pi_k log pi_k.
    """
    m = q.dim
    pis = q.weights
    logdets = np.array([c.cov.log_det for c in q.components])
    value = 0.5 * m * (1 + _LOG_2PI) + 0.5 * pis @ logdets - pis @ np.log(pis)
    return EntropyEstimate(value=float(value), method="ours")


def _shared_diagonal_vars(q: GaussianMixture) -> np.ndarray:
    """Common diagonal variance vector, or raise if covariances differ."""
    vars_ = []
    for c in q.components:
        if c.cov.kind == "iso":
            vars_.append(np.full(q.dim, c.cov._var))
        elif c.cov.kind == "diag":
            vars_.append(c.cov._vars)
        else:
            raise UnsupportedConfiguration(
                "order-2 Taylor entropy needs diagonal covariances"
            )
    first = vars_[0]
    if any(not np.array_equal(v, first) for v in vars_[1:]):
        raise UnsupportedConfiguration(
            "order-2 Taylor entropy needs one covariance shared by all components"
        )
    return first


def _pairwise_gaussian_at_means(q: GaussianMixture) -> np.ndarray:
    """dens[k, k'] = N(mu_k | mu_k', Sigma_k')."""
    K, m = q.n_components, q.dim
    dens = np.empty((K, K))
    for kp, comp in enumerate(q.components):
        z = comp.cov.whiten(q.means - comp.mean)
        sq = np.einsum("ij,ij->i", z, z)
        dens[:, kp] = np.exp(-0.5 * (m * _LOG_2PI + comp.cov.log_det + sq))
    return dens


def entropy_huber(q: GaussianMixture, order: int) -> EntropyEstimate:
    """Taylor-expansion entropy approximation of order 0 or 2."""
    if order not in (0, 2):
        raise ValueError("only Taylor orders 0 and 2 have closed forms")
    pis = q.weights
    order0 = -float(pis @ log_density(q, q.means))
    if order == 0:
        return EntropyEstimate(value=order0, method="huber0")

    vars_ = _shared_diagonal_vars(q)
    dens = _pairwise_gaussian_at_means(q)  # (k, k')
    diffs = q.means[:, None, :] - q.means[None, :, :]  # (k, k', i)
    g0 = dens @ pis  # (k,)
    scaled = diffs / vars_  # (mu_k,i - mu_k',i)/sigma_i^2
    g1 = np.einsum("kpi,p,kp->ki", scaled, pis, dens)
    g2 = np.einsum("kpi,p,kp->ki", scaled**2 - 1.0 / vars_, pis, dens)
    c_ki = (g0[:, None] * g2 - g1**2) / g0[:, None] ** 2
    correction = 0.5 * float(pis @ (c_ki @ vars_))
    return EntropyEstimate(value=order0 + correction, method="huber2")


def entropy_bonilla(q: GaussianMixture, weighted: bool = False) -> EntropyEstimate:
    """Jensen-inequality lower bound on the mixture entropy.

    The inner sum over components is unweighted, matching the closed form as
    printed in its source for this comparison; pass ``weighted=True`` for the
    pi_k'-weighted variant.
    """
    K, m = q.n_components, q.dim
    pis = q.weights
    covs = [c.cov.dense() for c in q.components]
    value = 0.0
    for k in range(K):
        logs = np.empty(K)
        for kp in range(K):
            s = covs[k] + covs[kp]
            sign, logdet = np.linalg.slogdet(s)
            d = q.means[k] - q.means[kp]
            sq = float(d @ np.linalg.solve(s, d))
            logs[kp] = -0.5 * (m * _LOG_2PI + logdet + sq)
            if weighted:
                logs[kp] += np.log(pis[kp])
        top = logs.max()
        value -= pis[k] * (top + np.log(np.sum(np.exp(logs - top))))
    return EntropyEstimate(value=float(value), method="bonilla")


def entropy_mc(q: GaussianMixture, n: int, seed: int) -> EntropyEstimate:
    """Plain Monte Carlo entropy: mean of -log q over n draws from q."""
    if n < 2:
        raise ValueError("Monte Carlo entropy needs n >= 2")
    lp = log_density(q, sample(q, n, seed))
    value = -float(np.mean(lp))
    std_error = float(np.std(lp, ddof=1) / np.sqrt(n))
    return EntropyEstimate(value=value, method="mc", std_error=std_error, n_samples=n)


def _require_shared_covariance(q: GaussianMixture):
    first = q.components[0].cov
    for c in q.components[1:]:
        if c.cov != first:
            raise UnsupportedConfiguration("all components must share one covariance")
    return first


def entropy_exact_k2(q: GaussianMixture, n_nodes: int = 100) -> EntropyEstimate:
    """Exact entropy for K=2 with a shared covariance, via 1-D Gauss-Hermite.

    H = H_ours - sum_k (pi_k/sqrt(pi)) sum_j w_j
        log(1 + (pi_k'/pi_k) exp(-2|a|^2 + 2 sqrt(2) |a| t_j)),
    with a = Sigma^{-1/2}(mu_1 - mu_2)/2.
    """
    if q.n_components != 2:
        raise UnsupportedConfiguration("the Gauss-Hermite reduction needs K = 2")
    cov = _require_shared_covariance(q)
    a_norm = float(np.linalg.norm(cov.whiten(q.means[0] - q.means[1]))) / 2.0
    nodes, weights = gauss_hermite(n_nodes)
    pis = q.weights
    correction = 0.0
    for k, kp in ((0, 1), (1, 0)):
        expo = np.log(pis[kp] / pis[k]) - 2 * a_norm**2 + 2 * np.sqrt(2) * a_norm * nodes
        correction += pis[k] / np.sqrt(np.pi) * float(weights @ np.logaddexp(0.0, expo))
    base = entropy_ours(q).value
    return EntropyEstimate(value=base - correction, method="gh", n_samples=n_nodes)


def reduction_vectors(q: GaussianMixture) -> list[np.ndarray]:
    """Per-component (K-1)-dimensional images u_{k',k} of the whitened mean gaps.

    For each k the K-1 vectors Sigma^{-1/2}(mu_k' - mu_k) are rotated into
    span{e_1..e_{K-1}} by a Householder QR basis; rank deficiency is padded by
    the orthonormal columns QR produces for dependent inputs.
    """
    cov = _require_shared_covariance(q)
    K = q.n_components
    us = []
    for k in range(K):
        others = [kp for kp in range(K) if kp != k]
        d = np.stack([cov.whiten(q.means[kp] - q.means[k]) for kp in others], axis=1)
        qbasis, _ = np.linalg.qr(d)  # (m, K-1), orthonormal
        us.append(qbasis.T @ d)  # (K-1, K-1); column j is u for others[j]
    return us


def entropy_reduced_mc(q: GaussianMixture, n: int, seed: int) -> EntropyEstimate:
    """Shared-covariance entropy via the (K-1)-dimensional reduced integral.

    Estimates the reduced Gaussian integral by Monte Carlo over standard
    normal draws and subtracts it from the closed-form approximation.
    """
    K, m = q.n_components, q.dim
    if K < 2:
        raise UnsupportedConfiguration("the reduced form needs K >= 2")
    if m < K - 1:
        raise UnsupportedConfiguration("the reduced form needs m >= K - 1")
    us = reduction_vectors(q)
    pis = q.weights
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal((n, K - 1))
    per_draw = np.zeros(n)
    for k in range(K):
        others = [kp for kp in range(K) if kp != k]
        # exponent (|v|^2 - |v - u|^2)/2 = v.u - |u|^2/2, per other component
        u = us[k]  # (K-1, K-1), columns indexed like `others`
        expo = v @ u - 0.5 * np.sum(u * u, axis=0)
        expo += np.log(pis[others] / pis[k])
        stacked = np.concatenate([np.zeros((n, 1)), expo], axis=1)
        top = stacked.max(axis=1)
        per_draw += pis[k] * (top + np.log(np.sum(np.exp(stacked - top[:, None]), axis=1)))
    base = entropy_ours(q).value
    value = base - float(np.mean(per_draw))
    std_error = float(np.std(per_draw, ddof=1) / np.sqrt(n))
    return EntropyEstimate(value=value, method="reduced_mc", std_error=std_error, n_samples=n)

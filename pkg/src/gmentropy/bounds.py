"""Separation metrics and entropy-approximation error bounds.

Implements the two pairwise separation measures (directed ratio and
largest-disjoint-ball radius), the Monte Carlo cone coefficient entering the
lower bound, the general and shared-covariance upper/lower error bounds, the
parameter-derivative bounds, and the probabilistic tail bounds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .mixture import Covariance, GaussianMixture, UnsupportedConfiguration, op_norm_cross

__all__ = [
    "AlphaMatrix",
    "BoundReport",
    "DerivativeBoundReport",
    "alpha_pair",
    "alpha_set",
    "c_coefficient",
    "error_bounds_general",
    "error_bounds_shared",
    "derivative_bounds",
    "probabilistic_bound_rhs",
    "best_s",
    "S_GRID",
]

S_GRID = np.round(np.arange(0.01, 1.0, 0.01), 2)  # 0.01 .. 0.99


@dataclass
class AlphaMatrix:
    pairwise: np.ndarray              # (K, K), diagonal unused (zeros)
    set_based: np.ndarray | None = None  # symmetric (K, K) or None if not solved


@dataclass
class BoundReport:
    lower: float
    upper: float
    s_used: float
    variant: str                      # "general" | "shared"
    alpha: AlphaMatrix
    c_values: np.ndarray              # (K, K)
    c_std_errors: np.ndarray | None   # (K, K); None when every pair is exact
    c_exact: bool


@dataclass
class DerivativeBoundReport:
    mu_bounds: np.ndarray     # (K, m)
    gamma_bounds: np.ndarray  # (K, m, m)
    pi_bounds: np.ndarray     # (K,)
    s_used: float


def _check_s(s: float):
    if not (0.0 < s < 1.0):
        raise ValueError(f"sharpness parameter s must lie in (0, 1), got {s}")


# ---------------------------------------------------------------------------
# separation measures
# ---------------------------------------------------------------------------

def alpha_pair(q: GaussianMixture, k: int, kp: int) -> float:
    """Directed separation: ||mu_k - mu_k'||_{Sigma_k} / (1 + ||Sigma_k^{-1/2} Sigma_k'^{1/2}||_op)."""
    if k == kp:
        raise ValueError("alpha_pair needs two distinct components")
    ck, ckp = q.components[k].cov, q.components[kp].cov
    num = float(np.linalg.norm(ck.whiten(q.means[k] - q.means[kp])))
    return num / (1.0 + op_norm_cross(ck, ckp))


def _constrained_nearest(m_mat, d, t):
    """min_y |M y - d| subject to |y| <= t, for invertible M (so the free min is 0).

    Returns the constrained minimum; 0 when the ellipsoid already reaches d.
    """
    if t <= 0.0:
        return float(np.linalg.norm(d))
    y_free = np.linalg.solve(m_mat, d)
    if np.linalg.norm(y_free) <= t:
        return 0.0
    gram = m_mat.T @ m_mat
    evals, evecs = np.linalg.eigh(gram)
    c = evecs.T @ (m_mat.T @ d)

    def radius_sq(lam):
        return float(np.sum((c / (evals + lam)) ** 2))

    if radius_sq(0.0) <= t * t:  # borderline feasible under this eigenbasis
        return 0.0

    # |y(lam)| decreases from |M^{-1} d| (> t) toward 0; bracket and solve
    hi = np.linalg.norm(c) / t
    lo = 0.0
    while radius_sq(hi) > t * t:
        lo, hi = hi, hi * 2.0
    lam = brentq(lambda l: radius_sq(l) - t * t, lo, hi, xtol=1e-14, rtol=1e-15)
    y = evecs @ (c / (evals + lam))
    return float(np.linalg.norm(m_mat @ y - d))


def alpha_set(q: GaussianMixture, k: int, kp: int, tol: float = 1e-10) -> float:
    """Largest radius keeping the two Mahalanobis alpha-balls disjoint.

    Equals min_x max(||x - mu_k||_{Sigma_k}, ||x - mu_k'||_{Sigma_k'}); solved
    by bisecting the radius t on the monotone gap between t and the distance
    from the t-ball of component k to mu_k' (a trust-region subproblem solved
    through its KKT multiplier).
    """
    if k == kp:
        raise ValueError("alpha_set needs two distinct components")
    ck, ckp = q.components[k].cov, q.components[kp].cov
    gap = q.means[kp] - q.means[k]
    if not np.any(gap):
        return 0.0
    # whiten w.r.t. component k: x = mu_k + Gamma_k y
    m_mat = ckp.inv_sqrt_dense() @ ck.sqrt_dense()
    d = ckp.whiten(gap)

    def objective(t):
        return _constrained_nearest(m_mat, d, t) - t

    t_hi = float(np.linalg.norm(ck.whiten(gap)))  # ball of this radius reaches mu_k'
    t_lo = 0.0
    if objective(t_hi) > 0:  # other norm still dominates; widen the bracket
        while objective(t_hi) > 0:
            t_lo, t_hi = t_hi, 2 * t_hi
    return float(brentq(objective, t_lo, t_hi, xtol=tol, rtol=1e-15))


# ---------------------------------------------------------------------------
# cone coefficient
# ---------------------------------------------------------------------------

def c_coefficient(q: GaussianMixture, k: int, kp: int, n: int = 100_000,
                  seed: int = 0):
    """Standard-normal measure of the cone region entering the lower bound.

    Returns (value, std_error); std_error is None for the exact
    equal-covariance case, where the region is a half space and c = 1/2.
    """
    if k == kp:
        raise ValueError("c_coefficient needs two distinct components")
    ck, ckp = q.components[k].cov, q.components[kp].cov
    if ck == ckp:
        return 0.5, None
    gamma_k = ck.sqrt_dense()
    inv_kp = ckp.inv_sqrt_dense()
    a_mat = inv_kp @ gamma_k            # Sigma_k'^{-1/2} Gamma_k
    quad = a_mat.T @ a_mat              # Gamma_k Sigma_k'^{-1} Gamma_k
    b = gamma_k @ (inv_kp @ ckp.whiten(q.means[kp] - q.means[k]))
    rng = np.random.Generator(np.random.Philox(key=seed))
    y = rng.standard_normal((n, q.dim))
    cond1 = np.einsum("ij,ij->i", y, y) >= np.einsum("ij,jl,il->i", y, quad, y)
    cond2 = y @ b >= 0.0
    p_hat = float(np.mean(cond1 & cond2))
    return p_hat, float(np.sqrt(p_hat * (1 - p_hat) / n))


# ---------------------------------------------------------------------------
# error bounds
# ---------------------------------------------------------------------------

def _alpha_pairwise(q: GaussianMixture) -> np.ndarray:
    K = q.n_components
    out = np.zeros((K, K))
    for k in range(K):
        for kp in range(K):
            if k != kp:
                out[k, kp] = alpha_pair(q, k, kp)
    return out


def _alpha_setbased(q: GaussianMixture, tol: float = 1e-10) -> np.ndarray:
    K = q.n_components
    out = np.zeros((K, K))
    for k in range(K):
        for kp in range(k + 1, K):
            out[k, kp] = out[kp, k] = alpha_set(q, k, kp, tol)
    return out


def _upper_general(q: GaussianMixture, s: float, alpha: np.ndarray) -> float:
    pis = q.weights
    K, m = q.n_components, q.dim
    tot = 0.0
    for k in range(K):
        for kp in range(K):
            if k != kp:
                tot += np.sqrt(pis[k] * pis[kp]) * np.exp(-s * alpha[k, kp] ** 2 / 4)
    return min(K / 2.0, 2.0 / (1 - s) ** (m / 4.0) * tot)


def _lower_general(q: GaussianMixture, alpha_pw: np.ndarray, c_vals: np.ndarray) -> float:
    pis = q.weights
    K = q.n_components
    half_logdets = np.array([0.5 * c.cov.log_det for c in q.components])
    max_half = half_logdets.max()
    tot = 0.0
    for k in range(K):
        for kp in range(K):
            if k == kp:
                continue
            opn = op_norm_cross(q.components[kp].cov, q.components[k].cov)
            inner = ((1 - pis[k]) / pis[k]
                     * np.exp(half_logdets[k] - max_half)
                     * np.exp(-0.5 * (1 + opn) ** 2 * alpha_pw[kp, k] ** 2))
            tot += pis[k] * pis[kp] / (1 - pis[k]) * c_vals[k, kp] * np.log1p(inner)
    return tot


def best_s(upper_of_s) -> float:
    """Grid search over s in {0.01, ..., 0.99} minimizing the given upper bound."""
    uppers = [upper_of_s(s) for s in S_GRID]
    return float(S_GRID[int(np.argmin(uppers))])


def error_bounds_general(q: GaussianMixture, s: float | None = 0.5,
                         use_alpha_set: bool = False, n_c: int = 100_000,
                         seed: int = 0) -> BoundReport:
    """Upper and lower bounds on |H - H_ours| for arbitrary covariances.

    ``s=None`` selects s by grid search minimizing the upper bound.
    """
    if q.n_components < 2:
        zero = np.zeros((1, 1))
        return BoundReport(0.0, 0.0, 0.5 if s is None else s, "general",
                           AlphaMatrix(zero), zero, None, True)
    alpha_pw = _alpha_pairwise(q)
    alpha_sb = _alpha_setbased(q) if use_alpha_set else None
    alpha_up = alpha_sb if use_alpha_set else alpha_pw
    if s is None:
        s = best_s(lambda sv: _upper_general(q, sv, alpha_up))
    else:
        _check_s(s)
    K = q.n_components
    c_vals = np.zeros((K, K))
    c_ses = np.zeros((K, K))
    all_exact = True
    for k in range(K):
        for kp in range(K):
            if k == kp:
                continue
            val, se = c_coefficient(q, k, kp, n=n_c, seed=seed + 1000 * k + kp)
            c_vals[k, kp] = val
            if se is not None:
                c_ses[k, kp] = se
                all_exact = False
    return BoundReport(
        lower=float(_lower_general(q, alpha_pw, c_vals)),
        upper=float(_upper_general(q, s, alpha_up)),
        s_used=float(s),
        variant="general",
        alpha=AlphaMatrix(pairwise=alpha_pw, set_based=alpha_sb),
        c_values=c_vals,
        c_std_errors=None if all_exact else c_ses,
        c_exact=all_exact,
    )


def _shared_alpha(q: GaussianMixture) -> np.ndarray:
    cov = q.components[0].cov
    for c in q.components[1:]:
        if c.cov != cov:
            raise UnsupportedConfiguration("shared-covariance bounds need one covariance")
    K = q.n_components
    out = np.zeros((K, K))
    for k in range(K):
        for kp in range(k + 1, K):
            a = 0.5 * float(np.linalg.norm(cov.whiten(q.means[k] - q.means[kp])))
            out[k, kp] = out[kp, k] = a
    return out


def error_bounds_shared(q: GaussianMixture, s: float | None = 0.5) -> BoundReport:
    """Sharper bounds for coincident covariances (m >= K >= 2).

    The dimension blow-up factor is replaced by (1-s)^{-(K-1)/4} and the cone
    coefficients are exactly 1/2.
    """
    K, m = q.n_components, q.dim
    if K < 2 or m < K - 1:
        raise UnsupportedConfiguration("shared-covariance bounds need m >= K - 1 and K >= 2")
    alpha = _shared_alpha(q)
    pis = q.weights

    def upper_of_s(sv):
        tot = 0.0
        for k in range(K):
            for kp in range(K):
                if k != kp:
                    tot += np.sqrt(pis[k] * pis[kp]) * np.exp(-sv * alpha[k, kp] ** 2 / 4)
        return 2.0 / (1 - sv) ** ((K - 1) / 4.0) * tot

    if s is None:
        s = best_s(upper_of_s)
    else:
        _check_s(s)
    lower = 0.0
    for k in range(K):
        for kp in range(K):
            if k != kp:
                lower += (pis[k] * pis[kp] / (1 - pis[k])
                          * np.log1p((1 - pis[k]) / pis[k] * np.exp(-2 * alpha[kp, k] ** 2)))
    lower *= 0.5
    c_vals = np.full((K, K), 0.5)
    np.fill_diagonal(c_vals, 0.0)
    return BoundReport(
        lower=float(lower),
        upper=float(upper_of_s(s)),
        s_used=float(s),
        variant="shared",
        alpha=AlphaMatrix(pairwise=alpha, set_based=None),
        c_values=c_vals,
        c_std_errors=None,
        c_exact=True,
    )


# ---------------------------------------------------------------------------
# derivative bounds
# ---------------------------------------------------------------------------

def _abs_minor_dets(mat: np.ndarray) -> np.ndarray:
    """|det| of the submatrix deleting row p and column q, for all (p, q)."""
    m = mat.shape[0]
    out = np.empty((m, m))
    if m == 1:
        out[0, 0] = 1.0  # empty determinant
        return out
    for p in range(m):
        rows = np.delete(np.arange(m), p)
        for qq in range(m):
            cols = np.delete(np.arange(m), qq)
            out[p, qq] = abs(np.linalg.det(mat[np.ix_(rows, cols)]))
    return out


def derivative_bounds(q: GaussianMixture, s: float = 0.5) -> DerivativeBoundReport:
    """Bounds on the error derivatives w.r.t. means, sqrt-factor entries, weights."""
    _check_s(s)
    K, m = q.n_components, q.dim
    pis = q.weights
    mu_bounds = np.zeros((K, m))
    gamma_bounds = np.zeros((K, m, m))
    pi_bounds = np.zeros(K)
    if K == 1:
        return DerivativeBoundReport(mu_bounds, gamma_bounds, pi_bounds, s)

    alpha_pw = _alpha_pairwise(q)
    gammas = [c.cov.sqrt_dense() for c in q.components]
    inv_gammas = [c.cov.inv_sqrt_dense() for c in q.components]
    one_norms = [float(np.sum(np.abs(g))) for g in inv_gammas]
    inv_dets = [float(np.exp(-0.5 * c.cov.log_det)) for c in q.components]  # 1/|Gamma_k|
    minors = [_abs_minor_dets(g) for g in gammas]

    for k in range(K):
        mu_tot = 0.0
        gamma_tot = np.zeros((m, m))
        pi_tot = 0.0
        for kp in range(K):
            if kp == k:
                continue
            decay = np.exp(-s * max(alpha_pw[k, kp], alpha_pw[kp, k]) ** 2 / 4)
            w = np.sqrt(pis[k] * pis[kp])
            mu_tot += w * (one_norms[kp] + one_norms[k]) * decay
            gamma_tot += w * (2 * inv_dets[k] * minors[k]
                              + one_norms[k] + one_norms[kp]) * decay
            pi_tot += np.sqrt(pis[kp] / pis[k]) * decay
        mu_bounds[k, :] = 2.0 / (1 - s) ** ((m + 2) / 4.0) * mu_tot
        gamma_bounds[k] = 6.0 / (1 - s) ** ((m + 4) / 4.0) * gamma_tot
        pi_bounds[k] = 8.0 / (1 - s) ** (m / 4.0) * pi_tot
    return DerivativeBoundReport(mu_bounds, gamma_bounds, pi_bounds, s)


# ---------------------------------------------------------------------------
# probabilistic bounds
# ---------------------------------------------------------------------------

def probabilistic_bound_rhs(variant: str, K: int, m: int, c: float, s: float,
                            eps: float) -> float:
    """Tail-probability bound on P(|H - H_ours| >= eps) under Gaussian mean gaps."""
    _check_s(s)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if c <= 0:
        raise ValueError("c must be positive")
    if variant == "general":
        return 2 * (K - 1) / eps * (np.sqrt(1 - s) * (1 + s * c**2 / 2)) ** (-m / 2.0)
    if variant == "shared":
        return (2 * (K - 1) / (eps * (1 - s) ** ((K - 1) / 4.0))
                * (1 + s * c**2 / 2) ** (-m / 2.0))
    raise ValueError(f"unknown variant {variant!r}")

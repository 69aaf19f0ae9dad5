"""Gauss-Hermite quadrature nodes and weights.

Rules integrate exp(-t^2) g(t) over the real line as sum w_j g(t_j).
Initial node estimates come from the Jacobi (Golub-Welsch) matrix and are
polished by Newton iteration on the orthonormal Hermite recurrence; weights
use the Christoffel sum 1 / sum_k p_k(t_j)^2, which stays finite at any
order (factorial-free).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["gauss_hermite"]

_RESIDUAL_TOL = 1e-14


def _hermite_eval(n: int, x: np.ndarray):
    """Orthonormal Hermite values p_0..p_n at x; returns (p_n, p_n', christoffel).

    Recurrence for polynomials orthonormal under exp(-x^2):
      p_0 = pi^{-1/4},  p_{k+1} = x sqrt(2/(k+1)) p_k - sqrt(k/(k+1)) p_{k-1}.
    """
    p_prev = np.zeros_like(x)
    p = np.full_like(x, np.pi ** -0.25)
    chris = p * p
    for k in range(n):
        p_next = x * np.sqrt(2.0 / (k + 1)) * p - np.sqrt(k / (k + 1)) * p_prev
        p_prev, p = p, p_next
        if k < n - 1:
            chris += p * p
    deriv = np.sqrt(2.0 * n) * p_prev
    return p, deriv, chris


@lru_cache(maxsize=32)
def gauss_hermite(n_nodes: int):
    """Return (nodes, weights), each of shape (n_nodes,)."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if n_nodes == 1:
        return np.array([0.0]), np.array([np.sqrt(np.pi)])
    # Golub-Welsch: eigenvalues of the symmetric tridiagonal Jacobi matrix
    off = np.sqrt(np.arange(1, n_nodes) / 2.0)
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    nodes = np.linalg.eigvalsh(jacobi)
    # Newton polish to machine-precision residual
    for _ in range(50):
        p, dp, _ = _hermite_eval(n_nodes, nodes)
        step = p / dp
        nodes = nodes - step
        if np.max(np.abs(p)) < _RESIDUAL_TOL and np.max(np.abs(step)) < 1e-15:
            break
    p, _, chris = _hermite_eval(n_nodes, nodes)
    weights = 1.0 / chris
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights

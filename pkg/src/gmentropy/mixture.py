"""Gaussian mixture data types and the linear-algebra primitives built on them.

Covariances carry a cached symmetric PSD square root, its inverse, and the
log-determinant so that densities, Mahalanobis norms, and whitened sampling
never re-factorize. Isotropic and diagonal covariances are kept in compact
form and handled on exact special-case paths.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Covariance",
    "GaussianComponent",
    "GaussianMixture",
    "NumericalError",
    "UnsupportedConfiguration",
    "mahalanobis_norm",
    "log_density",
    "sample",
    "op_norm_cross",
    "mixture_to_json",
    "mixture_from_json",
]

# eigenvalues below this fraction of the largest are treated as rank deficiency
_PD_RTOL = 1e-12


class NumericalError(RuntimeError):
    """An iterative routine failed to reach its tolerance."""


class UnsupportedConfiguration(ValueError):
    """The operation's analytic preconditions are not met by this mixture."""


class Covariance:
    """Positive-definite covariance with cached factorizations.

    Construct through :meth:`isotropic`, :meth:`diagonal`, or :meth:`full`.
    Immutable after construction.
    """

    __slots__ = ("dim", "kind", "_var", "_vars", "_mat", "_gamma", "_inv_gamma", "log_det")

    def __init__(self, kind: str, dim: int, var=None, vars_=None, mat=None):
        self.kind = kind
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        self._var = var
        self._vars = vars_
        self._mat = mat
        if kind == "iso":
            if not (np.isfinite(var) and var > 0):
                raise ValueError(f"isotropic variance must be positive, got {var}")
            self._gamma = np.sqrt(var)
            self._inv_gamma = 1.0 / self._gamma
            self.log_det = self.dim * np.log(var)
        elif kind == "diag":
            vars_ = np.asarray(vars_, dtype=float)
            if vars_.shape != (self.dim,):
                raise ValueError("diagonal variances must be a length-m vector")
            if not (np.isfinite(vars_).all() and (vars_ > 0).all()):
                raise ValueError("diagonal variances must all be positive and finite")
            self._vars = vars_
            self._gamma = np.sqrt(vars_)
            self._inv_gamma = 1.0 / self._gamma
            self.log_det = float(np.sum(np.log(vars_)))
        elif kind == "full":
            mat = np.asarray(mat, dtype=float)
            if mat.shape != (self.dim, self.dim):
                raise ValueError(f"expected a {self.dim}x{self.dim} matrix, got {mat.shape}")
            asym = np.abs(mat - mat.T).max()
            scale = max(np.abs(mat).max(), 1.0)
            if asym > 1e-12 * scale:
                raise ValueError(f"covariance is not symmetric (max asymmetry {asym:.3e})")
            mat = 0.5 * (mat + mat.T)
            evals, evecs = np.linalg.eigh(mat)
            if evals[0] <= _PD_RTOL * evals[-1] or evals[-1] <= 0:
                raise ValueError(
                    f"covariance is not positive definite (eigenvalues in "
                    f"[{evals[0]:.3e}, {evals[-1]:.3e}])"
                )
            self._mat = mat
            sq = np.sqrt(evals)
            # symmetric PSD square root, so factor entries are well-defined
            # objects for the derivative bounds
            self._gamma = (evecs * sq) @ evecs.T
            self._inv_gamma = (evecs / sq) @ evecs.T
            self.log_det = float(np.sum(np.log(evals)))
        else:
            raise ValueError(f"unknown covariance kind {kind!r}")

    # -- constructors ------------------------------------------------------
    @classmethod
    def isotropic(cls, dim: int, var: float) -> "Covariance":
        return cls("iso", dim, var=float(var))

    @classmethod
    def diagonal(cls, vars_) -> "Covariance":
        vars_ = np.asarray(vars_, dtype=float)
        return cls("diag", vars_.shape[0], vars_=vars_)

    @classmethod
    def full(cls, mat) -> "Covariance":
        mat = np.asarray(mat, dtype=float)
        return cls("full", mat.shape[0], mat=mat)

    # -- dense views ---------------------------------------------------------
    def dense(self) -> np.ndarray:
        if self.kind == "iso":
            return self._var * np.eye(self.dim)
        if self.kind == "diag":
            return np.diag(self._vars)
        return self._mat

    def sqrt_dense(self) -> np.ndarray:
        if self.kind == "full":
            return self._gamma
        return np.diag(np.broadcast_to(self._gamma, (self.dim,)).copy())

    def inv_sqrt_dense(self) -> np.ndarray:
        if self.kind == "full":
            return self._inv_gamma
        return np.diag(np.broadcast_to(self._inv_gamma, (self.dim,)).copy())

    # -- factor application (x may be a vector or a batch of row vectors) ----
    def whiten(self, x: np.ndarray) -> np.ndarray:
        """Apply the inverse square root factor to rows of x."""
        if self.kind == "full":
            return x @ self._inv_gamma
        return x * self._inv_gamma

    def color(self, z: np.ndarray) -> np.ndarray:
        """Apply the square root factor to rows of z."""
        if self.kind == "full":
            return z @ self._gamma
        return z * self._gamma

    def __eq__(self, other):
        if not isinstance(other, Covariance):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.dense(), other.dense())

    def __hash__(self):  # immutable value object
        return hash((self.kind, self.dim, self.log_det))

    def __repr__(self):
        return f"Covariance(kind={self.kind!r}, dim={self.dim})"


@dataclass(frozen=True)
class GaussianComponent:
    mean: np.ndarray
    cov: Covariance
    weight: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        object.__setattr__(self, "mean", mean)
        if mean.ndim != 1 or mean.shape[0] != self.cov.dim:
            raise ValueError("mean and covariance dimensions disagree")
        if not np.isfinite(mean).all():
            raise ValueError("mean must be finite")
        if not (0 < self.weight <= 1):
            raise ValueError(f"component weight must lie in (0, 1], got {self.weight}")


class GaussianMixture:
    """Ordered collection of weighted Gaussian components over a common space."""

    def __init__(self, components):
        components = list(components)
        if len(components) < 1:
            raise ValueError("a mixture needs at least one component")
        dim = components[0].cov.dim
        if any(c.cov.dim != dim for c in components):
            raise ValueError("all components must share one dimension")
        total = sum(c.weight for c in components)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {total!r})")
        self.components = components
        self.dim = dim

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.stack([c.mean for c in self.components])

    def __repr__(self):
        return f"GaussianMixture(K={self.n_components}, m={self.dim})"


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def mahalanobis_norm(x: np.ndarray, mu: np.ndarray, cov: Covariance) -> float:
    """sqrt((x-mu) . Sigma^{-1} (x-mu)), computed as |Gamma^{-1}(x-mu)|."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if x.shape != (cov.dim,) or mu.shape != (cov.dim,):
        raise ValueError("dimension mismatch in mahalanobis_norm")
    return float(np.linalg.norm(cov.whiten(x - mu)))


def _component_log_pdf(comp: GaussianComponent, x: np.ndarray) -> np.ndarray:
    """Log Gaussian density for a batch of row vectors x (n, m)."""
    z = comp.cov.whiten(x - comp.mean)
    m = comp.cov.dim
    return -0.5 * (m * np.log(2 * np.pi) + comp.cov.log_det + np.einsum("ij,ij->i", z, z))


def log_density(mixture: GaussianMixture, x: np.ndarray):
    """Log mixture density at x; x may be a vector (m,) or a batch (n, m).

    Components are combined by log-sum-exp so that well-separated components
    do not underflow.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != mixture.dim:
        raise ValueError("dimension mismatch in log_density")
    logs = np.stack(
        [np.log(c.weight) + _component_log_pdf(c, x) for c in mixture.components]
    )
    top = logs.max(axis=0)
    out = top + np.log(np.sum(np.exp(logs - top), axis=0))
    return float(out[0]) if single else out


def sample(mixture: GaussianMixture, n: int, seed: int) -> np.ndarray:
    """Draw n points: pick a component by weight, then mean + Gamma z.

    Uses a counter-based Philox generator so explicit seeds give independent,
    reproducible streams.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    ks = rng.choice(mixture.n_components, size=n, p=mixture.weights)
    z = rng.standard_normal((n, mixture.dim))
    out = np.empty_like(z)
    for k, comp in enumerate(mixture.components):
        mask = ks == k
        if mask.any():
            out[mask] = comp.mean + comp.cov.color(z[mask])
    return out


def op_norm_cross(cov_a: Covariance, cov_b: Covariance, rtol: float = 1e-10,
                  max_iter: int = 10_000) -> float:
    """Largest singular value of Sigma_a^{-1/2} Sigma_b^{1/2}.

    Power iteration on the Gram matrix M^T M to relative tolerance `rtol`.
    """
    if cov_a.dim != cov_b.dim:
        raise ValueError("covariances must share one dimension")
    m_mat = cov_a.inv_sqrt_dense() @ cov_b.sqrt_dense()
    gram = m_mat.T @ m_mat
    dim = cov_a.dim
    rng = np.random.Generator(np.random.Philox(key=0x5EED))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = float(v @ gram @ v)
    for it in range(1, max_iter + 1):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise NumericalError("power iteration collapsed to the zero vector")
        v = w / nw
        lam_new = float(v @ gram @ v)
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return float(np.sqrt(lam_new))
        lam = lam_new
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _cov_to_obj(cov: Covariance):
    if cov.kind == "iso":
        data = [cov._var]
    elif cov.kind == "diag":
        data = cov._vars.tolist()
    else:
        data = cov._mat.tolist()
    return {"kind": cov.kind, "data": data}


def _cov_from_obj(obj, dim: int) -> Covariance:
    kind, data = obj["kind"], obj["data"]
    if kind == "iso":
        return Covariance.isotropic(dim, data[0])
    if kind == "diag":
        return Covariance.diagonal(data)
    if kind == "full":
        return Covariance.full(data)
    raise ValueError(f"unknown covariance kind {kind!r}")


def mixture_to_json(mixture: GaussianMixture) -> str:
    doc = {
        "components": [
            {"weight": c.weight, "mean": c.mean.tolist(), "cov": _cov_to_obj(c.cov)}
            for c in mixture.components
        ]
    }
    return json.dumps(doc)


def mixture_from_json(text: str) -> GaussianMixture:
    doc = json.loads(text)
    comps = []
    for obj in doc["components"]:
        mean = np.asarray(obj["mean"], dtype=float)
        cov = _cov_from_obj(obj["cov"], mean.shape[0])
        comps.append(GaussianComponent(mean=mean, cov=cov, weight=obj["weight"]))
    return GaussianMixture(comps)

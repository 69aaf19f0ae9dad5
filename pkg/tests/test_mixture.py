"""Covariance/mixture primitives: factorizations, densities, sampling, norms."""
import json

import numpy as np
import pytest

from gmentropy import (
    Covariance,
    GaussianComponent,
    GaussianMixture,
    log_density,
    mahalanobis_norm,
    mixture_from_json,
    mixture_to_json,
    op_norm_cross,
    sample,
)

from oracles import log_density_mpmath


def unit_1d(weight=1.0, mu=0.0, var=1.0):
    return GaussianComponent(np.array([mu]), Covariance.isotropic(1, var), weight)


def two_comp_1d(mu2, var1=1.0, var2=1.0, w1=0.5):
    return GaussianMixture([
        unit_1d(w1, 0.0, var1),
        unit_1d(1.0 - w1, mu2, var2),
    ])


class TestCovariance:
    def test_full_sqrt_reconstructs(self):
        rng = np.random.Generator(np.random.Philox(key=1))
        for _ in range(20):
            m = int(rng.integers(1, 7))
            a = rng.standard_normal((m, m))
            mat = a @ a.T + m * np.eye(m)
            cov = Covariance.full(mat)
            gamma = cov.sqrt_dense()
            assert np.allclose(gamma @ gamma, mat, rtol=1e-10)
            assert np.allclose(gamma, gamma.T, atol=1e-12)
            sign, logdet = np.linalg.slogdet(mat)
            assert cov.log_det == pytest.approx(logdet, abs=1e-10)

    def test_diag_and_full_agree(self):
        vars_ = np.array([0.3, 2.5, 1.1])
        d = Covariance.diagonal(vars_)
        f = Covariance.full(np.diag(vars_))
        x = np.array([0.4, -1.2, 2.0])
        mu = np.zeros(3)
        assert mahalanobis_norm(x, mu, d) == pytest.approx(
            mahalanobis_norm(x, mu, f), abs=1e-10)
        assert d.log_det == pytest.approx(f.log_det, abs=1e-12)
        assert np.allclose(d.whiten(x), f.whiten(x), atol=1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            Covariance.full([[1.0, 0.5], [0.2, 1.0]])

    def test_rejects_non_pd(self):
        with pytest.raises(ValueError):
            Covariance.full([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ValueError):
            Covariance.isotropic(1, 0.0)
        with pytest.raises(ValueError):
            Covariance.diagonal([1.0, -1.0])


class TestMahalanobis:
    def test_identity(self):
        cov = Covariance.isotropic(2, 1.0)
        assert mahalanobis_norm(np.array([1.0, 0.0]), np.zeros(2), cov) == 1.0

    def test_scalar_scaling(self):
        cov = Covariance.isotropic(1, 4.0)
        assert mahalanobis_norm(np.array([2.0]), np.zeros(1), cov) == pytest.approx(1.0)

    def test_diagonal(self):
        cov = Covariance.diagonal([1.0, 4.0])
        got = mahalanobis_norm(np.array([1.0, 1.0]), np.zeros(2), cov)
        assert got == pytest.approx(1.1180339887, abs=1e-9)

    def test_zero_iff_equal(self):
        cov = Covariance.isotropic(3, 2.0)
        x = np.array([0.1, -0.2, 0.3])
        assert mahalanobis_norm(x, x, cov) == 0.0
        assert mahalanobis_norm(x, np.zeros(3), cov) > 0.0


class TestLogDensity:
    def test_standard_normal_at_zero(self):
        q = GaussianMixture([unit_1d()])
        assert log_density(q, np.zeros(1)) == pytest.approx(-0.9189385332, abs=1e-9)

    def test_duplicate_components_collapse(self):
        q = GaussianMixture([unit_1d(0.5), unit_1d(0.5)])
        assert log_density(q, np.zeros(1)) == pytest.approx(-0.9189385332, abs=1e-9)

    def test_against_extended_precision(self):
        q = two_comp_1d(3.0)
        for x in (-2.0, 0.0, 1.5, 3.0, 8.0):
            want = log_density_mpmath([0.5, 0.5], [0.0, 3.0], [1.0, 1.0], x)
            assert log_density(q, np.array([x])) == pytest.approx(want, abs=1e-12)

    def test_no_premature_underflow(self):
        q = two_comp_1d(60.0)
        got = log_density(q, np.array([60.0]))
        want = log_density_mpmath([0.5, 0.5], [0.0, 60.0], [1.0, 1.0], 60.0)
        assert np.isfinite(got)
        assert got == pytest.approx(want, abs=1e-10)

    def test_integrates_to_one_2d(self):
        cov = Covariance.full([[1.0, 0.3], [0.3, 0.8]])
        q = GaussianMixture([
            GaussianComponent(np.zeros(2), cov, 0.4),
            GaussianComponent(np.array([1.0, -0.5]), Covariance.diagonal([0.5, 1.5]), 0.6),
        ])
        grid = np.linspace(-9, 10, 381)
        xx, yy = np.meshgrid(grid, grid)
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        dens = np.exp(log_density(q, pts))
        h = grid[1] - grid[0]
        assert float(dens.sum() * h * h) == pytest.approx(1.0, abs=1e-4)


class TestSample:
    def test_moments(self):
        q = GaussianMixture([unit_1d()])
        xs = sample(q, 100_000, 7)
        assert abs(xs.mean()) < 3 / np.sqrt(100_000) * 1.1
        assert abs(xs.var() - 1.0) < 0.05

    def test_deterministic(self):
        q = two_comp_1d(3.0)
        assert np.array_equal(sample(q, 1000, 42), sample(q, 1000, 42))
        assert not np.array_equal(sample(q, 1000, 42), sample(q, 1000, 43))

    def test_component_frequencies(self):
        q = two_comp_1d(50.0, w1=0.1)
        xs = sample(q, 100_000, 3)
        frac = float(np.mean(xs[:, 0] < 25.0))
        assert 0.09 <= frac <= 0.11

    def test_empirical_covariance(self):
        rng = np.random.Generator(np.random.Philox(key=11))
        a = rng.standard_normal((3, 3))
        mat = a @ a.T + 3 * np.eye(3)
        q = GaussianMixture([GaussianComponent(np.arange(3.0), Covariance.full(mat), 1.0)])
        xs = sample(q, 1_000_000, 5)
        emp = np.cov(xs.T)
        assert np.linalg.norm(emp - mat) / np.linalg.norm(mat) < 0.02


class TestOpNorm:
    def test_identity(self):
        c = Covariance.isotropic(3, 1.0)
        assert op_norm_cross(c, c) == pytest.approx(1.0, abs=1e-9)

    def test_diagonal_swap(self):
        a = Covariance.diagonal([1.0, 4.0])
        b = Covariance.diagonal([4.0, 1.0])
        assert op_norm_cross(a, b) == pytest.approx(2.0, abs=1e-8)

    def test_isotropic_ratio(self):
        a = Covariance.isotropic(5, 4.0)
        b = Covariance.isotropic(5, 1.0)
        assert op_norm_cross(a, b) == pytest.approx(0.5, abs=1e-9)

    def test_matches_svd(self):
        rng = np.random.Generator(np.random.Philox(key=2))
        for _ in range(10):
            m = int(rng.integers(1, 6))
            a = rng.standard_normal((m, m))
            b = rng.standard_normal((m, m))
            ca = Covariance.full(a @ a.T + m * np.eye(m))
            cb = Covariance.full(b @ b.T + m * np.eye(m))
            want = np.linalg.svd(ca.inv_sqrt_dense() @ cb.sqrt_dense(), compute_uv=False)[0]
            assert op_norm_cross(ca, cb) == pytest.approx(want, rel=1e-8)


class TestSerialization:
    def test_round_trip_all_kinds(self):
        q = GaussianMixture([
            GaussianComponent(np.array([0.25]), Covariance.isotropic(1, 0.7), 0.2),
            GaussianComponent(np.array([-1.5]), Covariance.diagonal([2.0]), 0.3),
            GaussianComponent(np.array([3.125]), Covariance.full([[1.25]]), 0.5),
        ])
        back = mixture_from_json(mixture_to_json(q))
        assert back.n_components == 3
        for c0, c1 in zip(q.components, back.components):
            assert np.array_equal(c0.mean, c1.mean)
            assert c0.weight == c1.weight
            assert c0.cov == c1.cov
            assert c0.cov.kind == c1.cov.kind

    def test_schema_shape(self):
        q = GaussianMixture([unit_1d()])
        doc = json.loads(mixture_to_json(q))
        assert set(doc) == {"components"}
        assert set(doc["components"][0]) == {"weight", "mean", "cov"}
        assert set(doc["components"][0]["cov"]) == {"kind", "data"}


class TestValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            GaussianMixture([unit_1d(0.5), unit_1d(0.6)])

    def test_dims_must_agree(self):
        with pytest.raises(ValueError):
            GaussianMixture([
                unit_1d(0.5),
                GaussianComponent(np.zeros(2), Covariance.isotropic(2, 1.0), 0.5),
            ])

    def test_weight_range(self):
        with pytest.raises(ValueError):
            GaussianComponent(np.zeros(1), Covariance.isotropic(1, 1.0), 0.0)

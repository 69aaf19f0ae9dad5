"""Mixture-posterior variational trainer: objective, gradients, training,
prediction."""
import numpy as np
import pytest

from gmentropy.bnn import (
    MLPSpec,
    TrainConfig,
    VariationalPosterior,
    elbo,
    elbo_gradient,
    generate_dataset,
    mlp_forward,
    model_from_json,
    model_to_json,
    predict,
    train,
)

_LOG_2PI = np.log(2 * np.pi)


def rho_for_sigma(sigma):
    return float(np.log(np.expm1(sigma)))


def random_posterior(spec, K, seed, scale=0.5):
    rng = np.random.Generator(np.random.Philox(key=seed))
    m = spec.weight_count
    return VariationalPosterior(rng.standard_normal((K, m)) * scale,
                                rng.standard_normal((K, m)) * 0.3,
                                rng.standard_normal(K) * 0.5)


def likelihood_term(spec, posterior, k, x, y, eps, lik_std):
    w = posterior.sigmas[k] * eps + posterior.mus[k]
    f = mlp_forward(spec, w, x)
    return float(np.sum(-0.5 * np.log(2 * np.pi * lik_std**2)
                        - (y - f) ** 2 / (2 * lik_std**2)))


class TestSpec:
    def test_weight_count(self):
        assert MLPSpec().weight_count == 97
        assert MLPSpec(hidden=(2,)).weight_count == (1 + 1) * 2 + (2 + 1) * 1

    def test_forward_deterministic_linear_tail(self):
        # zero weights except the output bias: constant function
        spec = MLPSpec(hidden=(2,))
        w = np.zeros(spec.weight_count)
        w[-1] = 3.5
        assert np.allclose(mlp_forward(spec, w, np.linspace(-5, 5, 11)), 3.5)


class TestDataset:
    def test_noise_free_curve(self):
        x, y = generate_dataset(200, noise_std=0.0, seed=1)
        assert np.allclose(y, x * np.sin(x), atol=1e-12)
        # includes the analytic points y(pi/2) = pi/2 and y(0) = 0
        assert abs(np.pi / 2 * np.sin(np.pi / 2) - np.pi / 2) < 1e-15

    def test_residual_spread(self):
        x, y = generate_dataset(20, noise_std=0.1, seed=0)
        resid = y - x * np.sin(x)
        assert 0.05 <= resid.std(ddof=1) <= 0.2

    def test_deterministic(self):
        assert np.array_equal(generate_dataset(20, seed=5)[0],
                              generate_dataset(20, seed=5)[0])


class TestElbo:
    def test_k1_reduces_to_unimodal(self):
        spec = MLPSpec(hidden=(2,))
        m = spec.weight_count
        post = random_posterior(spec, 1, 2)
        x, y = generate_dataset(4, seed=3)
        eps = np.zeros(m)
        val = elbo(post, spec, x, y, 4, eps, 2.0, 0.1)
        lik = likelihood_term(spec, post, 0, x, y, eps, 0.1)
        sig = post.sigmas[0]
        cross = -0.5 * (m * _LOG_2PI + 2 * m * np.log(2.0)
                        + (np.sum(sig**2) + np.sum(post.mus[0] ** 2)) / 4.0)
        ent = 0.5 * m * (1 + _LOG_2PI) + np.sum(np.log(sig))
        assert val == pytest.approx(lik + cross + ent, rel=1e-12)

    def test_hand_pinned_closed_form_parts(self):
        # m=2 network, unit sigmas, unit prior: cross-entropy + entropy = 0
        spec = MLPSpec(hidden=())  # single linear layer: m = 2
        assert spec.weight_count == 2
        post = VariationalPosterior(np.zeros((1, 2)),
                                    np.full((1, 2), rho_for_sigma(1.0)),
                                    np.zeros(1))
        x, y = np.array([0.5]), np.array([0.2])
        eps = np.zeros(2)
        val = elbo(post, spec, x, y, 1, eps, 1.0, 0.1)
        lik = likelihood_term(spec, post, 0, x, y, eps, 0.1)
        assert val - lik == pytest.approx(0.0, abs=1e-12)

    def test_duplicate_component_adds_weight_entropy(self):
        spec = MLPSpec(hidden=(2,))
        m = spec.weight_count
        rng = np.random.Generator(np.random.Philox(key=5))
        mu = rng.standard_normal(m)
        rho = rng.standard_normal(m)
        x, y = generate_dataset(5, seed=6)
        eps = rng.standard_normal(m)
        single = VariationalPosterior(mu[None], rho[None], np.zeros(1))
        double = VariationalPosterior(np.stack([mu, mu]), np.stack([rho, rho]),
                                      np.zeros(2))
        v1 = elbo(single, spec, x, y, 5, eps, 3.0, 0.1)
        v2 = elbo(double, spec, x, y, 5, eps, 3.0, 0.1)
        assert v2 - v1 == pytest.approx(np.log(2), rel=1e-10)

    def test_permutation_invariance(self):
        spec = MLPSpec(hidden=(2,))
        post = random_posterior(spec, 3, 7)
        perm = VariationalPosterior(post.mus[::-1].copy(), post.rhos[::-1].copy(),
                                    post.logits[::-1].copy())
        x, y = generate_dataset(4, seed=8)
        eps = np.random.Generator(np.random.Philox(key=9)).standard_normal(spec.weight_count)
        assert elbo(post, spec, x, y, 4, eps, 2.0, 0.1) == pytest.approx(
            elbo(perm, spec, x, y, 4, eps, 2.0, 0.1), rel=1e-12)


class TestGradient:
    def check_fd(self, spec, post, x, y, eps, prior_std, step=1e-5, tol=1e-4):
        args = (spec, x, y, x.shape[0], eps, prior_std, 0.1)
        gm, gr, gl = elbo_gradient(post, *args)
        for name, grad in (("mus", gm), ("rhos", gr), ("logits", gl)):
            num = np.zeros_like(grad)
            it = np.nditer(num, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                p1, p2 = post.copy(), post.copy()
                getattr(p1, name)[i] += step
                getattr(p2, name)[i] -= step
                num[i] = (elbo(p1, *args) - elbo(p2, *args)) / (2 * step)
            denom = np.maximum(np.abs(num), 1.0)
            assert np.max(np.abs(grad - num) / denom) <= tol, name

    def test_tiny_instance_fd(self):
        spec = MLPSpec(hidden=(2,))
        post = random_posterior(spec, 2, 11)
        rng = np.random.Generator(np.random.Philox(key=12))
        x = np.array([-1.0, 0.3, 2.0])
        y = x * np.sin(x)
        self.check_fd(spec, post, x, y, rng.standard_normal(spec.weight_count), 2.0)

    def test_fd_along_training_trajectory(self):
        spec = MLPSpec(hidden=(2,))
        x, y = generate_dataset(5, seed=13)
        cfg = TrainConfig(epochs=30, learning_rate=0.05, prior_std=10.0,
                          likelihood_std=0.1, K=2, seed=13)
        rng = np.random.Generator(np.random.Philox(key=14))
        # re-run training manually, checking every 10th step
        post, _ = train(spec, cfg, x, y)
        for _ in range(3):
            eps = rng.standard_normal(spec.weight_count)
            self.check_fd(spec, post, x, y, eps, 10.0)
            post.mus += 0.01 * rng.standard_normal(post.mus.shape)

    def test_prior_gradient_vanishes_for_huge_prior_std(self):
        spec = MLPSpec(hidden=(2,))
        post = random_posterior(spec, 2, 15)
        # the prior pull on the means is exactly -mu / prior_std^2
        pull = np.abs(post.mus) / 1e6**2
        assert np.all(pull <= 1e-9 * np.maximum(np.abs(post.mus), 1e-30))

    def test_weight_entropy_stationary_at_uniform(self):
        # identical components make every per-component term equal, so the
        # logits gradient reduces to the weight-entropy part, zero at uniform
        spec = MLPSpec(hidden=(2,))
        m = spec.weight_count
        rng = np.random.Generator(np.random.Philox(key=16))
        mu, rho = rng.standard_normal(m), rng.standard_normal(m)
        post = VariationalPosterior(np.stack([mu, mu, mu]),
                                    np.stack([rho, rho, rho]), np.zeros(3))
        x, y = generate_dataset(4, seed=17)
        _, _, gl = elbo_gradient(post, spec, x, y, 4, rng.standard_normal(m), 2.0, 0.1)
        assert np.allclose(gl, 0.0, atol=1e-12)


class TestTrain:
    def test_epochs_zero_returns_initialization(self):
        spec = MLPSpec()
        x, y = generate_dataset(20, seed=0)
        cfg0 = TrainConfig(epochs=0, K=3, seed=5)
        p0, trace = train(spec, cfg0, x, y)
        assert trace.size == 0
        p1, _ = train(spec, TrainConfig(epochs=1, K=3, seed=5), x, y)
        assert not np.array_equal(p0.mus, p1.mus)

    def test_deterministic(self):
        spec = MLPSpec(hidden=(4,))
        x, y = generate_dataset(10, seed=1)
        cfg = TrainConfig(epochs=20, K=2, seed=3)
        _, t1 = train(spec, cfg, x, y)
        _, t2 = train(spec, cfg, x, y)
        assert np.array_equal(t1, t2)

    def test_objective_improves(self):
        spec = MLPSpec()
        x, y = generate_dataset(20, seed=0)
        post, trace = train(spec, TrainConfig(epochs=100, K=5, seed=0), x, y)
        assert np.isfinite(trace).all()
        assert np.mean(trace[-10:]) > trace[0]
        assert np.isfinite(post.mus).all() and np.isfinite(post.rhos).all()
        assert (post.sigmas > 0).all()
        assert post.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_sgd_option_runs(self):
        spec = MLPSpec(hidden=(2,))
        x, y = generate_dataset(5, seed=2)
        cfg = TrainConfig(epochs=5, learning_rate=1e-6, K=2, seed=2, optimizer="sgd")
        _, trace = train(spec, cfg, x, y)
        assert trace.size == 5


class TestPredict:
    def test_deterministic_network_limit(self):
        spec = MLPSpec(hidden=(2,))
        m = spec.weight_count
        rng = np.random.Generator(np.random.Philox(key=21))
        mu = rng.standard_normal(m)
        post = VariationalPosterior(mu[None], np.full((1, m), -40.0), np.zeros(1))
        xs = np.linspace(-2, 2, 9)
        mean, std, comp = predict(post, spec, xs, 50, 0, 0.01)
        assert np.allclose(mean, mlp_forward(spec, mu, xs), atol=1e-8)
        assert np.allclose(std, 0.01, atol=1e-8)
        assert comp.shape == (1, 9)

    def test_two_point_mixture_moments(self):
        # constant networks at +1 and -1 via the output bias
        spec = MLPSpec(hidden=(2,))
        m = spec.weight_count
        mus = np.zeros((2, m))
        mus[0, -1] = 1.0
        mus[1, -1] = -1.0
        post = VariationalPosterior(mus, np.full((2, m), -40.0), np.zeros(2))
        xs = np.array([0.0, 1.0])
        mean, std, _ = predict(post, spec, xs, 20, 1, 0.1)
        assert np.allclose(mean, 0.0, atol=1e-8)
        assert np.allclose(std, np.sqrt(1.0 + 0.01), atol=1e-8)

    def test_uncertainty_grows_off_data(self):
        spec = MLPSpec()
        x, y = generate_dataset(20, seed=0)
        post, _ = train(spec, TrainConfig(epochs=100, K=5, seed=0), x, y)
        grid = np.arange(-6.0, 6.0 + 1e-9, 0.05)
        _, std, _ = predict(post, spec, grid, 200, 3, 0.01)
        dists = np.min(np.abs(grid[:, None] - x[None, :]), axis=1)
        far = std[dists > np.quantile(dists, 0.8)]
        near_train = np.array([
            std[int(np.argmin(np.abs(grid - xi)))] for xi in x])
        assert far.mean() > near_train.mean()


class TestSerialization:
    def test_round_trip(self):
        spec = MLPSpec()
        post = random_posterior(spec, 3, 31)
        text = model_to_json(spec, post, 0.01)
        spec2, post2, sigma_y = model_from_json(text)
        assert spec2 == spec
        assert sigma_y == 0.01
        assert np.array_equal(post.mus, post2.mus)
        assert np.array_equal(post.rhos, post2.rhos)
        assert np.array_equal(post.logits, post2.logits)

import numpy as np
import pytest

from conftest import random_orthonormal, random_spd
from projpost.gaussian import Gaussian, mixed_basis_full_rank
from projpost.linop import DenseOperator


class TestConstruction:
    def test_chol_reconstructs_covariance(self, rng):
        cov = random_spd(rng, 6)
        g = Gaussian(np.zeros(6), cov)
        err = np.linalg.norm(g.chol @ g.chol.T - cov) / np.linalg.norm(cov)
        assert err < 1e-10

    def test_asymmetric_covariance_rejected(self, rng):
        cov = random_spd(rng, 4)
        cov[0, 1] += 1e-6
        with pytest.raises(ValueError, match="symmetric"):
            Gaussian(np.zeros(4), cov)

    def test_semidefinite_rejected(self):
        cov = np.diag([1.0, 0.0])
        with pytest.raises(ValueError, match="positive definite"):
            Gaussian(np.zeros(2), cov)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            Gaussian(np.zeros(3), np.eye(2))


class TestSampling:
    def test_standard_normal_mean(self):
        g = Gaussian(np.zeros(3), np.eye(3))
        xs = g.sample(np.random.default_rng(5), size=100_000)
        assert np.all(np.abs(xs.mean(axis=0)) < 4.0 / np.sqrt(100_000))

    def test_diagonal_variances(self):
        g = Gaussian([3.0, -1.0], np.diag([4.0, 9.0]))
        xs = g.sample(np.random.default_rng(6), size=100_000)
        var = xs.var(axis=0)
        assert np.all(np.abs(var - [4.0, 9.0]) < 0.05 * np.array([4.0, 9.0]))

    def test_empirical_covariance_random_spd(self, rng):
        cov = random_spd(rng, 4)
        g = Gaussian(rng.standard_normal(4), cov)
        xs = g.sample(np.random.default_rng(7), size=100_000)
        emp = np.cov(xs.T)
        assert np.linalg.norm(emp - cov) / np.linalg.norm(cov) < 0.05

    def test_seed_determinism(self, rng):
        g = Gaussian(np.zeros(3), random_spd(rng, 3))
        a = g.sample(np.random.default_rng(42), size=10)
        b = g.sample(np.random.default_rng(42), size=10)
        assert np.array_equal(a, b)


class TestPrecisionNoise:
    def test_identity(self):
        g = Gaussian(np.zeros(2), np.eye(2))
        ws = g.sample_precision_noise(np.random.default_rng(0), size=100_000)
        assert np.all(np.abs(ws.var(axis=0) - 1.0) < 0.05)

    def test_scalar_inverse_variance(self):
        g = Gaussian([0.0], [[4.0]])
        ws = g.sample_precision_noise(np.random.default_rng(1), size=100_000)
        assert abs(ws.var() - 0.25) < 0.05 * 0.25

    def test_covariance_is_precision(self, rng):
        cov = random_spd(rng, 3)
        g = Gaussian(np.zeros(3), cov)
        ws = g.sample_precision_noise(np.random.default_rng(2), size=100_000)
        prec = np.linalg.inv(cov)
        emp = np.cov(ws.T)
        assert np.linalg.norm(emp - prec) / np.linalg.norm(prec) < 0.05


class TestLogDensity:
    def test_standard_normal_origin(self):
        g = Gaussian([0.0], [[1.0]])
        assert abs(g.log_density(np.zeros(1)) + 0.5 * np.log(2 * np.pi)) < 1e-14

    def test_at_mean_only_logdet(self, rng):
        cov = random_spd(rng, 5)
        mu = rng.standard_normal(5)
        g = Gaussian(mu, cov)
        expected = -0.5 * np.linalg.slogdet(2 * np.pi * cov)[1]
        assert abs(g.log_density(mu) - expected) < 1e-10

    def test_two_dim_hand_formula(self):
        # direct 2x2 inverse: prec = [[2,-1],[-1,2]]/3, quad at (1,1) = 2/3
        g = Gaussian(np.zeros(2), [[2.0, 1.0], [1.0, 2.0]])
        expected = -0.5 * (2.0 / 3.0) - 0.5 * np.log((2 * np.pi) ** 2 * 3.0)
        assert abs(g.log_density(np.array([1.0, 1.0])) - expected) < 1e-12

    def test_dimension_mismatch(self):
        g = Gaussian(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError):
            g.log_density(np.zeros(3))

    def test_batch_matches_scalar(self, rng):
        g = Gaussian(rng.standard_normal(3), random_spd(rng, 3))
        pts = rng.standard_normal((5, 3))
        batch = g.log_density(pts)
        single = [g.log_density(p) for p in pts]
        assert np.allclose(batch, single, atol=1e-12)


class TestPrecisionRoundTrip:
    def test_prec_solve_agrees_with_direct(self, rng):
        for n in (2, 8, 32, 64):
            cov = random_spd(rng, n)
            g = Gaussian(np.zeros(n), cov)
            x = rng.standard_normal(n)
            via_prec = g.prec_chol @ (g.prec_chol.T @ x)
            direct = np.linalg.solve(cov, x)
            rel = np.linalg.norm(via_prec - direct) / np.linalg.norm(direct)
            assert rel < 1e-8

    def test_precision_apply(self, rng):
        cov = random_spd(rng, 4)
        g = Gaussian(np.zeros(4), cov)
        x = rng.standard_normal(4)
        assert np.allclose(g.precision_apply(x), np.linalg.solve(cov, x),
                           atol=1e-10)


class TestPrecisionFactorForm:
    def test_matches_dense(self, rng):
        p = rng.standard_normal((6, 4)) + np.eye(6, 4) * 2
        mean = rng.standard_normal(4)
        g_impl = Gaussian.from_precision_factor(mean, p)
        g_dense = Gaussian(mean, np.linalg.inv(p.T @ p))
        x = rng.standard_normal(4)
        assert abs(g_impl.log_density(x) - g_dense.log_density(x)) < 1e-8

    def test_above_threshold_limited_interface(self, rng):
        p = np.eye(5) * 2.0
        g = Gaussian.from_precision_factor(np.zeros(5), p, dense_threshold=3)
        assert g.cov is None
        v = rng.standard_normal(5)
        assert np.allclose(g.precision_apply(v), 4.0 * v)
        with pytest.raises(NotImplementedError):
            g.sample(np.random.default_rng(0))
        with pytest.raises(NotImplementedError):
            g.log_density(v)

    def test_factor_operator_roundtrip(self, rng):
        cov = random_spd(rng, 4)
        g = Gaussian(np.zeros(4), cov)
        p_op = g.precision_factor_operator()
        v = rng.standard_normal(4)
        assert np.allclose(p_op.apply_t(p_op.apply(v)),
                           np.linalg.solve(cov, v), atol=1e-9)


class TestMixedBasis:
    def test_identity_sigma(self, rng):
        u = random_orthonormal(rng, 5, 5)
        assert mixed_basis_full_rank(u[:, :2], u[:, 2:], np.eye(5))

    def test_random_triples_always_full_rank(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 17))
            k = int(rng.integers(1, n))
            u = random_orthonormal(rng, n, n)
            sigma = random_spd(rng, n, cond=50.0)
            assert mixed_basis_full_rank(u[:, :k], u[:, k:], sigma)

    def test_violated_precondition_detected(self, rng):
        u = random_orthonormal(rng, 3, 3)
        u1 = u[:, :1]
        u2_bad = np.column_stack([u[:, 0], u[:, 2]])
        assert not mixed_basis_full_rank(u1, u2_bad, np.eye(3))

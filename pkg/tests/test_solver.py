import numpy as np
import pytest

from conftest import random_spd
from projpost.gaussian import Gaussian
from projpost.linop import DenseOperator
from projpost.models import deblur_instance
from projpost.sets import (
    Box,
    Halfspace,
    NonnegativeOrthant,
    WholeSpace,
)
from projpost.solver import (
    PROJECTION_CONFIG,
    QuadraticProblem,
    SolverConfig,
    SolverError,
    fista_solve,
    oblique_project,
    oblique_project_batch,
    sample_projected_posterior,
)

EYE2 = DenseOperator(np.eye(2))


def _problem(a, bhat, l, chat, lam, delta, cset):
    return QuadraticProblem(DenseOperator(a), bhat, DenseOperator(l), chat,
                            lam, delta, cset)


class TestFistaExamples:
    def test_unconstrained_average_of_quadratics(self):
        prob = _problem(np.eye(2), np.array([2.0, 2.0]), np.eye(2),
                        np.zeros(2), 1.0, 1.0, WholeSpace(2))
        rep = fista_solve(prob, np.zeros(2),
                          SolverConfig(max_iter=500, grad_tol=1e-12))
        assert np.allclose(rep.solution, [1.0, 1.0], atol=1e-10)
        assert rep.final_gradient_map_norm <= 1e-10

    def test_orthant_kkt_by_hand(self):
        prob = _problem(np.eye(2), np.array([-3.0, 1.0]), np.eye(2),
                        np.zeros(2), 1.0, 1.0, NonnegativeOrthant(2))
        rep = fista_solve(prob, np.zeros(2),
                          SolverConfig(max_iter=500, grad_tol=1e-12))
        assert np.allclose(rep.solution, [0.0, 0.5], atol=1e-10)
        assert rep.solution[0] == 0.0

    def test_box_active_upper_bound(self):
        prob = _problem(np.eye(1), np.array([1e6]), np.eye(1), np.zeros(1),
                        1.0, 1.0, Box(np.zeros(1), np.ones(1)))
        rep = fista_solve(prob, np.zeros(1), SolverConfig(max_iter=200))
        assert rep.solution[0] == 1.0


class TestSolverContract:
    def test_exact_feasibility_clamp_sets(self, rng):
        for cset in (NonnegativeOrthant(6), Box.unit(6)):
            a = rng.standard_normal((8, 6)) + np.eye(8, 6)
            prob = _problem(a, rng.standard_normal(8) * 3, np.eye(6),
                            rng.standard_normal(6), 2.0, 0.5, cset)
            rep = fista_solve(prob, np.zeros(6), SolverConfig(max_iter=60))
            assert cset.violation(rep.solution) <= 0.0

    def test_nonfinite_data_raises(self):
        prob = _problem(np.eye(2), np.array([np.inf, 0.0]), np.eye(2),
                        np.zeros(2), 1.0, 1.0, WholeSpace(2))
        with pytest.raises(SolverError):
            fista_solve(prob, np.zeros(2), SolverConfig(max_iter=5))

    def test_pd_check_rejects_shared_nullspace(self):
        # both operators kill the constant vector
        d = np.eye(3) - np.roll(np.eye(3), 1, axis=1)
        with pytest.raises(ValueError, match="positive definite"):
            _problem(d, np.zeros(3), d.copy(), np.zeros(3), 1.0, 1.0,
                     WholeSpace(3))

    def test_monotone_objective_over_pg_tail(self, rng):
        # record iterates through the projection calls of the generic path
        class RecordingBox(Box):
            def __init__(self, lo, hi):
                super().__init__(lo, hi)
                self.trace = []

            def clip_bounds(self):  # force the generic path
                return None

            def project_batch(self, xs):
                out = super().project_batch(xs)
                self.trace.append(out[0].copy())
                return out

        cset = RecordingBox(np.zeros(4), np.ones(4))
        a = rng.standard_normal((6, 4)) + np.eye(6, 4)
        prob = _problem(a, 2.0 * rng.standard_normal(6), np.eye(4),
                        np.zeros(4), 1.0, 1.0, cset)
        fista_solve(prob, np.zeros(4), SolverConfig(max_iter=40, tail=5))
        # trace: x0 projection, then one projected iterate per iteration,
        # then the final gradient-map probe
        iterates = cset.trace[1:41]
        objs = [prob.objective(x) for x in iterates]
        tail = objs[-6:]
        assert all(tail[i + 1] <= tail[i] + 1e-14 for i in range(5))

    def test_iteration_budget_respected(self, rng):
        a = rng.standard_normal((5, 4)) + np.eye(5, 4)
        prob = _problem(a, rng.standard_normal(5), np.eye(4), np.zeros(4),
                        1.0, 1.0, NonnegativeOrthant(4))
        rep = fista_solve(prob, np.zeros(4), SolverConfig(max_iter=7))
        assert rep.iterations == 7


class TestObliqueProject:
    def test_identity_on_set(self, rng):
        g = Gaussian(np.zeros(2), random_spd(rng, 2))
        x = np.array([0.3, 0.4])
        assert np.array_equal(oblique_project(g, Box.unit(2), x), x)

    def test_reduces_to_euclidean_for_identity_cov(self, rng):
        for trial in range(100):
            n = int(rng.integers(2, 17))
            g = Gaussian(np.zeros(n), np.eye(n))
            kind = trial % 3
            if kind == 0:
                cset = NonnegativeOrthant(n)
            elif kind == 1:
                cset = Box.unit(n)
            else:
                cset = Halfspace(rng.standard_normal(n) + 0.1, 0.5)
            x = 2.0 * rng.standard_normal(n)
            z = oblique_project(g, cset, x,
                                SolverConfig(max_iter=4000, grad_tol=1e-11))
            assert np.linalg.norm(z - cset.project(x)) < 1e-8

    def test_halfspace_closed_form_example(self):
        g = Gaussian(np.zeros(2), np.diag([2.0, 1.0]))
        cset = Halfspace(np.array([1.0, 1.0]), 0.0)
        z = oblique_project(g, cset, np.array([1.0, 1.0]))
        assert np.allclose(z, [-1.0 / 3.0, 1.0 / 3.0], atol=1e-12)

    def test_halfspace_closed_form_vs_fista(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 9))
            g = Gaussian(rng.standard_normal(n), random_spd(rng, n))
            cset = Halfspace(rng.standard_normal(n) + 0.05, rng.standard_normal())
            x = 2.0 * rng.standard_normal(n)
            z_closed = oblique_project(g, cset, x)
            # force the iterative path by hiding the closed form
            p_op = g.precision_factor_operator()
            from projpost.solver import _zero_op

            prob = QuadraticProblem(p_op, p_op.apply(x), _zero_op(n),
                                    np.zeros(1), 1.0, 1.0, cset)
            rep = fista_solve(prob, cset.project(x),
                              SolverConfig(max_iter=8000, grad_tol=1e-12))
            assert np.linalg.norm(z_closed - rep.solution) < 1e-8

    def test_batch_matches_scalar(self, rng):
        g = Gaussian(np.array([0.5, -0.25]), random_spd(rng, 2))
        cset = NonnegativeOrthant(2)
        xs = 2.0 * rng.standard_normal((40, 2))
        zs = oblique_project_batch(g, cset, xs, tol=1e-12)
        for x, z in zip(xs, zs):
            z_ref = oblique_project(g, cset, x,
                                    SolverConfig(max_iter=4000, grad_tol=1e-12))
            assert np.linalg.norm(z - z_ref) < 1e-8


class TestSampler:
    def test_seed_determinism(self, rng):
        a = rng.standard_normal((8, 8)) + 2 * np.eye(8)
        b = rng.standard_normal(8)
        args = (DenseOperator(a), b, DenseOperator(np.eye(8)), 2.0, 3.0,
                NonnegativeOrthant(8))
        s1 = sample_projected_posterior(*args, np.random.default_rng(123))
        s2 = sample_projected_posterior(*args, np.random.default_rng(123))
        assert np.array_equal(s1, s2)

    def test_box_samples_exactly_feasible(self, rng):
        a = rng.standard_normal((8, 8)) + 2 * np.eye(8)
        b = 5.0 * rng.standard_normal(8)
        gen = np.random.default_rng(5)
        for _ in range(50):
            x = sample_projected_posterior(
                DenseOperator(a), b, DenseOperator(np.eye(8)), 2.0, 3.0,
                Box.unit(8), gen)
            assert np.all(x >= 0.0) and np.all(x <= 1.0)

    def test_unconstrained_moments_match_dense_posterior(self, rng):
        # reduced-size sibling of the acceptance check (10^4 draws there);
        # tolerances scaled for the smaller Monte Carlo budget
        n = 8
        a = rng.standard_normal((n, n)) + 2 * np.eye(n)
        lam, delta = 2.0, 3.0
        x_true = rng.standard_normal(n)
        b = a @ x_true + rng.standard_normal(n) / np.sqrt(lam)
        prec = lam * a.T @ a + delta * np.eye(n)
        cov_post = np.linalg.inv(prec)
        mean_post = lam * cov_post @ a.T @ b
        gen = np.random.default_rng(17)
        cfg = SolverConfig(max_iter=200, grad_tol=1e-9)
        draws = np.stack([
            sample_projected_posterior(DenseOperator(a), b,
                                       DenseOperator(np.eye(n)), lam, delta,
                                       WholeSpace(n), gen, cfg=cfg)
            for _ in range(2500)])
        mean_err = np.linalg.norm(draws.mean(axis=0) - mean_post) \
            / np.linalg.norm(mean_post)
        cov_err = np.linalg.norm(np.cov(draws.T) - cov_post) \
            / np.linalg.norm(cov_post)
        assert mean_err < 0.09
        assert cov_err < 0.09

    def test_halfspace_symmetric_mass_at_zero(self):
        # posterior N(0, 1/2) constrained to x <= 0: half the draws hit 0
        gen = np.random.default_rng(3)
        n_draws = 4000
        hits = 0
        a_op = DenseOperator(np.eye(1))
        cset = Halfspace(np.array([1.0]), 0.0)
        cfg = SolverConfig(max_iter=150, grad_tol=1e-10)
        for _ in range(n_draws):
            x = sample_projected_posterior(a_op, np.zeros(1), a_op, 1.0, 1.0,
                                           cset, gen, cfg=cfg)
            hits += abs(x[0]) <= 1e-12
        frac = hits / n_draws
        assert abs(frac - 0.5) <= 3.0 * np.sqrt(0.25 / n_draws)


@pytest.mark.slow
def test_solver_accuracy_ladder_deblur_median():
    inst = deblur_instance(n=128, seed=90)
    cset = Box.unit(128)
    medians = {}
    for budget in (100, 200):
        gen = np.random.default_rng(777)
        cfg = SolverConfig(max_iter=budget)
        warm = np.zeros(128)
        samples = np.empty((2000, 128))
        for i in range(2000):
            warm = sample_projected_posterior(
                inst.a_op, inst.b, inst.l_op, 1000.0, 150.0, cset, gen,
                cfg=cfg, warm_start=warm)
            samples[i] = warm
        medians[budget] = np.median(samples, axis=0)
    assert np.max(np.abs(medians[100] - medians[200])) < 1e-3

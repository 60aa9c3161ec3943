import numpy as np
import pytest
import scipy.sparse as sp

from safeguarded_alm.augmented import augmented_lagrangian_gradient, augmented_lagrangian_value
from safeguarded_alm.fields import Grid, norm_inf
from safeguarded_alm.newton import (
    InnerSolveError,
    NewtonSettings,
    SemismoothSystem,
    active_set,
    newton_solve,
    newton_step,
)
from safeguarded_alm.problems import BratuProblem, ObstacleProblem
from safeguarded_alm.sparse import NotPositiveDefiniteError, SPDFactor


class TestNewtonSolve:
    def test_inactive_obstacle_is_linear(self, rng):
        g = Grid(8)
        p = ObstacleProblem(g, psi=g.constant(-1.0))
        x, its = newton_solve(p, np.zeros(64), 1.0, rng.uniform(-0.5, 0.5, 64))
        assert its == 1
        assert norm_inf(x) <= 1e-12

    def test_toy_piecewise_quadratic(self, toy):
        # minimizer of x^2 + 2 ((1 - x)_+)^2 is 2/3
        x, its = newton_solve(toy, np.zeros(1), 4.0, np.zeros(1))
        assert x[0] == pytest.approx(2 / 3, abs=1e-12)
        assert its <= 3

    def test_bratu_subproblems_reach_tolerance(self, rng):
        p = BratuProblem(Grid(16), alpha=1.0)
        for _ in range(4):
            w = rng.uniform(0, 1, 256)
            rho = float(rng.choice([1.0, 10.0]))
            x, _ = newton_solve(p, w, rho, np.zeros(256))
            assert norm_inf(augmented_lagrangian_gradient(p, x, w, rho)) <= 1e-6

    @pytest.mark.parametrize("rho", [1.0, 1e2, 1e4, 1e6])
    def test_obstacle_finite_termination(self, rng, rho):
        p = ObstacleProblem(Grid(8))
        w = rng.uniform(0, 50, 64) * rng.integers(0, 2, 64)
        x, its = newton_solve(p, w, rho, np.zeros(64))
        assert its <= 64
        # active set at the solution carries the multiplier contribution
        lam = np.maximum(w + rho * p.constraint(x), 0.0)
        mask = active_set(w, rho, p.constraint(x))
        assert np.all((lam > 0) == (mask > 0))

    def test_monotone_decrease(self, rng):
        p = BratuProblem(Grid(8))
        w, rho = rng.uniform(0, 1, 64), 100.0
        values = [augmented_lagrangian_value(p, np.zeros(64), w, rho)]
        for k in range(1, 6):
            try:
                x, _ = newton_solve(p, w, rho, np.zeros(64), NewtonSettings(max_iter=k))
            except InnerSolveError as exc:
                x = exc.x
            values.append(augmented_lagrangian_value(p, x, w, rho))
        assert all(b <= a + 1e-14 * abs(a) for a, b in zip(values, values[1:]))

    def test_iteration_limit_raises_with_iterate(self):
        p = ObstacleProblem(Grid(16))
        with pytest.raises(InnerSolveError) as info:
            newton_solve(p, np.zeros(256), 1e6, np.zeros(256), NewtonSettings(max_iter=1))
        assert info.value.iterations == 1
        assert info.value.x.shape == (256,)

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            NewtonSettings(armijo_sigma=0.6)
        with pytest.raises(ValueError):
            NewtonSettings(backtrack_factor=1.0)


class TestNewtonStep:
    def test_no_active_set_is_plain_newton(self, rng):
        p = ObstacleProblem(Grid(5))
        grad = rng.normal(size=25)
        system = SemismoothSystem(p.objective_hessian(None), np.zeros(25), 1e3)
        d = newton_step(system, grad)
        np.testing.assert_allclose(2 * (p.A @ d), -grad, rtol=1e-10, atol=1e-12)

    def test_all_active_quadratic_one_step(self, rng):
        g = Grid(6)
        p = ObstacleProblem(g, psi=g.constant(1.0))
        w, rho = np.zeros(36), 50.0
        x0 = rng.uniform(-0.5, 0.5, 36)
        grad = augmented_lagrangian_gradient(p, x0, w, rho)
        d = newton_step(p.hessian_operator(x0, w, rho), grad)
        assert norm_inf(augmented_lagrangian_gradient(p, x0 + d, w, rho)) <= 1e-9

    def test_descent_direction(self, rng):
        p = BratuProblem(Grid(6))
        for _ in range(5):
            x, w = rng.normal(scale=0.1, size=36), rng.uniform(0, 1, 36)
            grad = augmented_lagrangian_gradient(p, x, w, 10.0)
            d = newton_step(p.hessian_operator(x, w, 10.0), grad)
            assert grad @ d < 0

    def test_general_jacobian(self):
        h = sp.csr_matrix(np.eye(2))
        jac = sp.csr_matrix([[1.0, 1.0]])
        m = SemismoothSystem(h, np.array([1.0]), 3.0, jac).matrix().toarray()
        np.testing.assert_allclose(m, [[4.0, 3.0], [3.0, 4.0]])

    def test_regularization_escalates(self):
        class Flaky:
            shifts = []

            def factorize(self, shift):
                self.shifts.append(shift)
                if shift < 1e-4:
                    raise NotPositiveDefiniteError("indefinite")
                return lambda rhs: rhs

        sys_ = Flaky()
        np.testing.assert_array_equal(newton_step(sys_, np.ones(2)), -np.ones(2))
        np.testing.assert_allclose(sys_.shifts, [0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4])

    def test_regularization_gives_up(self):
        class Broken:
            def factorize(self, shift):
                raise NotPositiveDefiniteError("indefinite")

        with pytest.raises(NotPositiveDefiniteError):
            newton_step(Broken(), np.ones(2))

    def test_shift_makes_indefinite_matrix_factorizable(self):
        h = sp.csr_matrix(np.diag([1.0, -1e-4]))
        system = SemismoothSystem(h, np.zeros(2), 1.0)
        with pytest.raises(NotPositiveDefiniteError):
            SPDFactor(system.matrix())
        d = newton_step(system, np.array([1.0, 1.0]))
        assert np.all(np.isfinite(d))

import numpy as np
import pytest

from safeguarded_alm.alm import RHO_LIMIT, SolverConfig, Status, Variant, solve
from safeguarded_alm.augmented import SafeguardRule
from safeguarded_alm.fields import Grid, Weight, norm_inf
from safeguarded_alm.newton import NewtonSettings
from safeguarded_alm.problems import ObstacleProblem, QuadraticProgram


def check_structure(report, config):
    rhos = [r.rho for r in report.trace]
    for a, b in zip(rhos, rhos[1:]):
        if config.variant is Variant.MOREAU_YOSIDA:
            assert b == config.gamma * a
        else:
            assert b in (a, config.gamma * a)
    for rec in report.trace[1:]:
        assert rec.lambda_min >= 0 and rec.w_min >= 0 and rec.w_excess <= 0
        assert rec.identity_residual <= 1e-12
        assert min(rec.feasibility, rec.complementarity_V, rec.kkt_grad_inf, rec.kkt_comp_inf) >= 0


class TestConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert (c.rho0, c.gamma, c.tau, c.w_max, c.outer_tol, c.inner_tol) == (1.0, 10.0, 0.1, 1e6, 1e-4, 1e-6)
        assert c.safeguard_rule is SafeguardRule.MIN_WITH_WMAX
        assert SolverConfig(variant="moreau-yosida").safeguard_rule is SafeguardRule.ZERO

    @pytest.mark.parametrize("kwargs", [
        dict(rho0=0.0), dict(gamma=1.0), dict(tau=1.0), dict(tau=0.0), dict(w_max=-1.0),
        dict(outer_tol=0.0), dict(inner_tol_schedule=[1e-3, 1e-2]), dict(inner_tol_schedule=[]),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_overrides(self):
        assert SolverConfig().with_overrides(tau=0.5).tau == 0.5
        with pytest.raises(ValueError):
            SolverConfig().with_overrides(bogus=1)

    def test_schedule(self):
        c = SolverConfig(inner_tol_schedule=[1e-2, 1e-4, 1e-6])
        assert [c.inner_tolerance(k) for k in range(5)] == [1e-2, 1e-4, 1e-6, 1e-6, 1e-6]


class TestSolve:
    def test_table1_first_row(self):
        report = solve(ObstacleProblem(Grid(16)))
        assert report.status is Status.CONVERGED
        assert report.outer_count == 6
        assert report.final_rho == 1e4
        # inner count is solver dependent; published value is 9
        assert 6 <= report.total_inner_count <= 15
        assert len(report.trace) == report.outer_count + 1
        assert report.total_inner_count == sum(r.inner_iterations for r in report.trace)

    def test_inactive_constraint(self):
        g = Grid(8)
        report = solve(ObstacleProblem(g, psi=g.constant(-1.0)))
        assert report.converged
        np.testing.assert_array_equal(report.final_lambda, 0.0)
        assert norm_inf(report.final_x) <= 1e-12

    def test_two_variable_qp(self):
        # min (x1-1)^2 + (x2-2)^2  s.t.  x1 + x2 <= 1  ->  x = (0, 1), lambda = 2
        qp = QuadraticProgram(2 * np.eye(2), [-2.0, -4.0], [[1.0, 1.0]], [1.0])
        report = solve(qp, SolverConfig(outer_tol=1e-8, inner_tol=1e-10))
        assert report.converged
        np.testing.assert_allclose(report.final_x, [0.0, 1.0], atol=1e-6)
        np.testing.assert_allclose(report.final_lambda, [2.0], atol=1e-6)

    @pytest.mark.parametrize("variant", list(Variant))
    def test_structure_invariants(self, variant):
        config = SolverConfig(variant=variant)
        report = solve(ObstacleProblem(Grid(24)), config)
        assert report.converged
        check_structure(report, config)
        last = report.trace[-1]
        assert last.kkt_grad_inf <= config.outer_tol and last.kkt_comp_inf <= config.outer_tol

    def test_bounded_penalty_implies_feasibility(self):
        config = SolverConfig()
        report = solve(ObstacleProblem(Grid(32)), config)
        kept = [r.penalty_kept for r in report.trace[1:]]
        if all(kept[len(kept) // 2:]):
            assert report.trace[-1].feasibility <= 10 * config.outer_tol

    def test_moreau_yosida_ignores_multipliers(self):
        report = solve(ObstacleProblem(Grid(12)), SolverConfig(variant=Variant.MOREAU_YOSIDA))
        assert all(not np.any(w) for w in report.safeguarded)
        assert report.final_rho == 10.0 ** report.outer_count

    def test_safeguard_caps_multiplier_estimate(self):
        report = solve(ObstacleProblem(Grid(16)), SolverConfig(w_max=5.0))
        assert all(np.max(w) <= 5.0 for w in report.safeguarded)
        assert report.converged

    def test_max_outer(self):
        report = solve(ObstacleProblem(Grid(8)), SolverConfig(max_outer=2))
        assert report.status is Status.MAX_OUTER
        assert report.outer_count == 2

    def test_inner_failure(self):
        report = solve(ObstacleProblem(Grid(16)), SolverConfig(), NewtonSettings(max_iter=1))
        assert report.status is Status.INNER_FAILURE
        assert "Newton" in report.message

    def test_rho_overflow_guard(self):
        report = solve(ObstacleProblem(Grid(8)), SolverConfig(rho0=RHO_LIMIT * 10))
        assert report.status is Status.INNER_FAILURE
        assert report.outer_count == 0

    def test_inner_tolerance_schedule(self):
        report = solve(ObstacleProblem(Grid(16)), SolverConfig(inner_tol_schedule=[1e-2, 1e-4, 1e-6]))
        assert report.converged

    def test_weighting_is_recorded(self):
        assert solve(ObstacleProblem(Grid(4))).inner_weighting == Weight.MESH.value

    def test_starting_point_override(self):
        g = Grid(8)
        p = ObstacleProblem(g)
        report = solve(p, SolverConfig(x0=p.psi + 0.01))
        assert report.converged
        np.testing.assert_array_equal(report.iterates[0], p.psi + 0.01)

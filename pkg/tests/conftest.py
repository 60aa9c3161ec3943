import numpy as np
import pytest

from safeguarded_alm.fields import Grid, Weight

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def fd_gradient(fun, x, scale=1.0, rel_step=1e-6):
    """Central finite differences of ``fun``, divided by the inner-product weight ``scale``."""
    x = np.asarray(x, dtype=float)
    step = rel_step * (1.0 + np.max(np.abs(x)))
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (fun(x + e) - fun(x - e)) / (2 * step)
    return out / scale


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def weight_scale(problem):
    return problem.grid.weight_factor(problem.weight) if problem.grid is not None else 1.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def toy():
    """``min x**2  s.t.  1 - x <= 0`` on a single unweighted point."""
    from safeguarded_alm.problems import QuadraticProgram

    return QuadraticProgram([[2.0]], [0.0], [[-1.0]], [-1.0], grid=Grid(1), weight=Weight.UNWEIGHTED)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")

"""Benchmark problems on the unit square behind a common interface.

Every problem exposes ``grid``, ``weight`` and

* ``objective(x)`` / ``objective_gradient(x)``
* ``constraint(x)``, the value ``g(x)`` with ``g(x) <= 0`` meaning feasible
* ``constraint_adjoint_apply(x, mu)``, i.e. ``g'(x)^* mu``
* ``hessian_operator(x, w, rho)``, a system with ``factorize(shift)``

Gradients are Riesz representatives with respect to the problem's inner
product, so with mesh weighting they approximate L2 gradients.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
import scipy.sparse as sp

from .fields import Grid, Weight, check_field, inner, norm_inf, positive_part
from .newton import SemismoothSystem, active_set
from .sparse import NotPositiveDefiniteError, SPDFactor, assemble_laplacian


class StateSolveError(RuntimeError):
    pass


class Problem:
    """Base class; subclasses fill in the evaluation methods."""

    name = "problem"
    weight = Weight.MESH
    grid: Grid | None = None

    def objective(self, x) -> float:
        raise NotImplementedError

    def objective_gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def constraint(self, x) -> np.ndarray:
        raise NotImplementedError

    def constraint_adjoint_apply(self, x, mu) -> np.ndarray:
        raise NotImplementedError

    def hessian_operator(self, x, w, rho: float):
        raise NotImplementedError

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dimension)

    @property
    def dimension(self) -> int:
        return self.grid.size

    @property
    def constraint_dimension(self) -> int:
        return self.dimension

    def _inner(self, a, b) -> float:
        return inner(a, b, self.weight, self.grid)


class QuadraticProgram(Problem):
    """``min s(1/2 x^T H x + c^T x)  s.t.  B x - b <= 0`` with ``s`` the weight factor.

    Used for small test problems; ``grid=None`` requires unweighted products.
    """

    name = "qp"

    def __init__(self, hessian, linear, constraint_matrix, constraint_rhs,
                 grid: Grid | None = None, weight: Weight = Weight.UNWEIGHTED):
        if grid is None and weight is Weight.MESH:
            raise ValueError("mesh weighting needs a grid")
        self.grid = grid
        self.weight = weight
        self.H = sp.csr_matrix(np.atleast_2d(hessian) if not sp.issparse(hessian) else hessian)
        self.c = np.atleast_1d(np.asarray(linear, dtype=float))
        self.B = sp.csr_matrix(np.atleast_2d(constraint_matrix) if not sp.issparse(constraint_matrix)
                               else constraint_matrix)
        self.b = np.atleast_1d(np.asarray(constraint_rhs, dtype=float))
        self._scale = grid.weight_factor(weight) if grid is not None else 1.0
        if self.B.shape != (self.b.size, self.c.size) or self.H.shape != (self.c.size,) * 2:
            raise ValueError("inconsistent QP dimensions")

    @property
    def dimension(self) -> int:
        return self.c.size

    @property
    def constraint_dimension(self) -> int:
        return self.b.size

    def objective(self, x):
        x = check_field(x)
        return float(self._scale * (0.5 * x @ (self.H @ x) + self.c @ x))

    def objective_gradient(self, x):
        return self.H @ check_field(x) + self.c

    def constraint(self, x):
        return self.B @ check_field(x) - self.b

    def constraint_adjoint_apply(self, x, mu):
        return self.B.T @ check_field(mu)

    def hessian_operator(self, x, w, rho):
        mask = active_set(w, rho, self.constraint(x))
        return SemismoothSystem(self.H, mask, rho, jacobian=self.B)


def obstacle_psi(grid: Grid) -> np.ndarray:
    """Cone-shaped obstacle ``max(0.1 - 0.5 |x - (0.5, 0.5)|, 0)``."""
    return grid.from_function(
        lambda x1, x2: np.maximum(0.1 - 0.5 * np.hypot(x1 - 0.5, x2 - 0.5), 0.0)
    )


def control_state_bound(grid: Grid) -> np.ndarray:
    """Pyramid-shaped lower state bound ``y_c``."""
    return grid.from_function(
        lambda x1, x2: -2.0 / 3.0 + 0.5 * np.minimum.reduce(
            [x1 + x2, 1 + x1 - x2, 1 - x1 + x2, 2 - x1 - x2]
        )
    )


def control_target_standin(grid: Grid) -> np.ndarray:
    """Tracking target ``4 - 8 sin(pi x1) sin(pi x2)``.

    Stand-in for an unpublished target. It pulls the state down in the middle
    of the domain, so the optimal state touches the pyramid ``y_c`` near its
    apex and the constraint is active at the solution.
    """
    return grid.from_function(lambda x1, x2: 4 - 8 * np.sin(np.pi * x1) * np.sin(np.pi * x2))


class ObstacleProblem(Problem):
    """Dirichlet energy ``<A u, u>`` subject to ``u >= psi``."""

    name = "obstacle"

    def __init__(self, grid: Grid, psi=None):
        self.grid = grid
        self.A = assemble_laplacian(grid)
        self.psi = obstacle_psi(grid) if psi is None else check_field(psi, grid)

    def objective(self, x):
        x = check_field(x, self.grid)
        return self._inner(self.A @ x, x)

    def objective_gradient(self, x):
        return 2.0 * (self.A @ check_field(x, self.grid))

    def constraint(self, x):
        return self.psi - check_field(x, self.grid)

    def constraint_adjoint_apply(self, x, mu):
        return -check_field(mu, self.grid)

    def objective_hessian(self, x) -> sp.csr_matrix:
        return sp.csr_matrix(2.0 * self.A)

    def hessian_operator(self, x, w, rho):
        mask = active_set(w, rho, self.constraint(x))
        return SemismoothSystem(self.objective_hessian(x), mask, rho)


class BratuProblem(ObstacleProblem):
    """Obstacle Bratu problem: ``<A u, u> - alpha * int exp(-u)`` subject to ``u >= psi``.

    The integral uses the interior midpoint rule with weight ``h**2``.
    """

    name = "bratu"
    EXP_LIMIT = 700.0

    def __init__(self, grid: Grid, alpha: float = 1.0, psi=None):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        super().__init__(grid, psi)
        self.alpha = float(alpha)
        self.clamped = False

    def _exp_neg(self, x) -> np.ndarray:
        arg = -check_field(x, self.grid)
        if np.any(arg > self.EXP_LIMIT):
            self.clamped = True
            arg = np.minimum(arg, self.EXP_LIMIT)
        return np.exp(arg)

    def objective(self, x):
        quad = super().objective(x)
        return quad - self.alpha * self.grid.h**2 * float(np.sum(self._exp_neg(x)))

    def objective_gradient(self, x):
        return super().objective_gradient(x) + self.alpha * self._exp_neg(x)

    def objective_hessian(self, x):
        return sp.csr_matrix(2.0 * self.A - sp.diags(self.alpha * self._exp_neg(x)))


class ControlSystem:
    """Reduced generalized Hessian of the control subproblem.

    Acts as ``alpha I + K^{-1} M K^{-1}`` with ``K = A + d'(y)`` and ``M``
    diagonal. ``H v = r`` is solved through the sparse SPD system
    ``(alpha K^2 + M) z = K r``, ``v = K z``. If the full second-order ``M``
    is indefinite, the Gauss-Newton choice ``M = I + rho diag(active)`` is used.
    """

    def __init__(self, K, alpha, m_full, m_gauss_newton):
        self.K = sp.csr_matrix(K)
        self.alpha = alpha
        self.m_full = m_full
        self.m_gauss_newton = m_gauss_newton
        self.used_gauss_newton = False

    def _factor(self, m, shift):
        mat = self.alpha * (self.K @ self.K) + sp.diags(m)
        if shift > 0:
            mat = mat + shift * np.max(np.abs(mat.diagonal())) * sp.identity(mat.shape[0])
        return SPDFactor(mat)

    def factorize(self, shift: float = 0.0):
        try:
            factor = self._factor(self.m_full, shift)
        except NotPositiveDefiniteError:
            self.used_gauss_newton = True
            factor = self._factor(self.m_gauss_newton, shift)
        return lambda rhs: self.K @ factor.solve(self.K @ rhs)


class ControlProblem(Problem):
    """Reduced semilinear control problem.

    ``min 1/2 ||S(u) - y_d||^2 + alpha/2 ||u||^2  s.t.  S(u) >= y_c`` where
    ``y = S(u)`` solves ``A y + y**3 = u``. ``linear=True`` drops the cubic
    term (test hook).
    """

    name = "control"

    def __init__(self, grid: Grid, alpha: float = 1e-3, y_d=None, y_c=None,
                 state_newton_tol: float = 1e-10, linear: bool = False, cache_size: int = 8):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.grid = grid
        self.alpha = float(alpha)
        self.A = assemble_laplacian(grid)
        self.y_d = control_target_standin(grid) if y_d is None else check_field(y_d, grid)
        self.y_c = control_state_bound(grid) if y_c is None else check_field(y_c, grid)
        self.state_newton_tol = state_newton_tol
        self.linear = linear
        self._cache: OrderedDict[bytes, np.ndarray] = OrderedDict()
        self._cache_size = cache_size
        self._last_state = grid.zeros()
        self.state_solves = 0

    # -- nonlinearity ------------------------------------------------------
    def _d(self, y):
        return np.zeros_like(y) if self.linear else y**3

    def _d_prime(self, y):
        return np.zeros_like(y) if self.linear else 3 * y**2

    def _d_second(self, y):
        return np.zeros_like(y) if self.linear else 6 * y

    def linearized_operator(self, y) -> sp.csr_matrix:
        return sp.csr_matrix(self.A + sp.diags(self._d_prime(y)))

    # -- state and adjoint -------------------------------------------------
    def state_residual(self, y, u) -> np.ndarray:
        return self.A @ y + self._d(y) - u

    def state_solve(self, u) -> np.ndarray:
        """Solve ``A y + d(y) = u`` by Newton's method damped on the convex energy."""
        u = check_field(u, self.grid)
        key = u.tobytes()
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        y = self._newton_state(u, self._last_state.copy())
        self._cache[key] = y
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        self._last_state = y
        self.state_solves += 1
        return y

    def _energy(self, y, u):
        quartic = 0.0 if self.linear else 0.25 * float(np.sum(y**4))
        return 0.5 * float(y @ (self.A @ y)) + quartic - float(u @ y)

    def _newton_state(self, u, y):
        anorm = 8.0 / self.grid.h**2
        for _ in range(100):
            r = self.state_residual(y, u)
            # rounding floor of evaluating the residual
            scale = anorm * norm_inf(y) + norm_inf(self._d(y)) + norm_inf(u)
            floor = 64 * np.finfo(float).eps * max(scale, 1.0)
            if norm_inf(r) <= max(self.state_newton_tol, floor):
                return y
            dy = SPDFactor(self.linearized_operator(y)).solve(-r)
            if norm_inf(self.state_residual(y + dy, u)) < norm_inf(r):
                y = y + dy
                continue
            e0 = self._energy(y, u)
            slope = float(-(r @ dy))
            t = 0.5
            while self._energy(y + t * dy, u) > e0 - 1e-4 * t * slope:
                t *= 0.5
                if t < 1e-10:
                    raise StateSolveError(f"state line search failed, residual {norm_inf(r):.3e}")
            y = y + t * dy
        raise StateSolveError(f"state Newton stagnated, residual {norm_inf(r):.3e}")

    def adjoint_solve(self, y, rhs) -> np.ndarray:
        """Solve the (self-adjoint) linearized system ``(A + d'(y)) p = rhs``."""
        rhs = check_field(rhs, self.grid)
        if not np.any(rhs):
            return np.zeros_like(rhs)
        return SPDFactor(self.linearized_operator(y)).solve(rhs)

    def linearized_state(self, u, v) -> np.ndarray:
        """Directional derivative ``S'(u) v``."""
        return self.adjoint_solve(self.state_solve(u), v)

    # -- problem interface -------------------------------------------------
    def objective(self, u):
        y = self.state_solve(u)
        diff = y - self.y_d
        return 0.5 * self._inner(diff, diff) + 0.5 * self.alpha * self._inner(u, u)

    def objective_gradient(self, u):
        y = self.state_solve(u)
        return self.alpha * check_field(u) + self.adjoint_solve(y, y - self.y_d)

    def constraint(self, u):
        return self.y_c - self.state_solve(u)

    def constraint_adjoint_apply(self, u, mu):
        return -self.adjoint_solve(self.state_solve(u), mu)

    def reduced_gradient(self, u, w, rho: float) -> np.ndarray:
        """Gradient of the reduced subproblem objective; ``rho = 0`` is allowed."""
        y = self.state_solve(u)
        lam = positive_part(np.asarray(w) + rho * (self.y_c - y))
        return self.alpha * check_field(u) + self.adjoint_solve(y, (y - self.y_d) - lam)

    def hessian_operator(self, u, w, rho):
        y = self.state_solve(u)
        g_val = self.y_c - y
        mask = active_set(w, rho, g_val)
        lam = positive_part(np.asarray(w) + rho * g_val)
        p = self.adjoint_solve(y, (y - self.y_d) - lam)
        m_gn = 1.0 + rho * mask
        m_full = m_gn - self._d_second(y) * p
        return ControlSystem(self.linearized_operator(y), self.alpha, m_full, m_gn)


def control_reduced_gradient(problem: ControlProblem, u, w, rho: float) -> np.ndarray:
    return problem.reduced_gradient(u, w, rho)


PROBLEMS = {"obstacle": ObstacleProblem, "bratu": BratuProblem, "control": ControlProblem}


def build_problem(name: str, n: int, **params) -> Problem:
    try:
        cls = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return cls(Grid(n), **params)

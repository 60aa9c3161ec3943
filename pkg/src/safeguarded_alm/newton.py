"""Semismooth Newton method with Armijo backtracking for the inner subproblems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .augmented import augmented_lagrangian_gradient, augmented_lagrangian_value
from .fields import inner, norm_inf
from .sparse import NotPositiveDefiniteError, SPDFactor


class InnerSolveError(RuntimeError):
    """The subproblem solver stopped before reaching its tolerance.

    Carries the best iterate found and the number of Newton steps spent.
    """

    def __init__(self, message: str, x: np.ndarray, iterations: int, grad_inf: float):
        super().__init__(message)
        self.x = x
        self.iterations = iterations
        self.grad_inf = grad_inf


@dataclass(frozen=True)
class NewtonSettings:
    tol_inf: float = 1e-6
    max_iter: int = 200
    armijo_sigma: float = 1e-4
    backtrack_factor: float = 0.5
    min_step: float = 1e-12
    regularization_shift: float = 0.0
    max_shift: float = 1e-2

    def __post_init__(self):
        if not (self.tol_inf > 0 and self.max_iter > 0 and self.min_step > 0):
            raise ValueError("Newton tolerances and limits must be positive")
        if not 0 < self.armijo_sigma < 0.5:
            raise ValueError("armijo_sigma must lie in (0, 1/2)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.regularization_shift < 0:
            raise ValueError("regularization_shift must be nonnegative")


@dataclass
class SemismoothSystem:
    """Generalized Hessian ``H + rho * J^T diag(active) J`` of the augmented Lagrangian.

    ``jacobian=None`` stands for ``J = -I`` (bound constraints), where the
    correction reduces to ``rho * diag(active)``.
    """

    hessian_base: sp.spmatrix
    active_mask: np.ndarray
    rho: float
    jacobian: sp.spmatrix | None = None

    def matrix(self) -> sp.csr_matrix:
        d = self.rho * np.asarray(self.active_mask, dtype=float)
        if self.jacobian is None:
            return sp.csr_matrix(self.hessian_base + sp.diags(d))
        jac = sp.csr_matrix(self.jacobian)
        return sp.csr_matrix(self.hessian_base + jac.T @ sp.diags(d) @ jac)

    def factorize(self, shift: float = 0.0):
        """Return a solver for the system; ``shift`` is relative to the largest diagonal entry."""
        m = self.matrix()
        if shift > 0:
            scale = np.max(np.abs(m.diagonal()))
            m = m + shift * scale * sp.identity(m.shape[0], format="csr")
        return SPDFactor(m).solve


def active_set(w, rho: float, g_val) -> np.ndarray:
    # ties at zero count as inactive
    return (np.asarray(w) + rho * np.asarray(g_val) > 0).astype(float)


def newton_step(system, gradient, settings: NewtonSettings | None = None) -> np.ndarray:
    """Solve ``system @ d = -gradient``, shifting the diagonal if the matrix is not SPD."""
    settings = settings or NewtonSettings()
    shift = settings.regularization_shift
    exponent = None
    while True:
        try:
            solve = system.factorize(shift)
            return solve(-np.asarray(gradient, dtype=float))
        except NotPositiveDefiniteError:
            if exponent is None:
                exponent = -8 if shift == 0 else int(np.floor(np.log10(shift))) + 1
            else:
                exponent += 1
            shift = 10.0**exponent
            if shift > settings.max_shift * (1 + 1e-12):
                raise


def newton_solve(problem, w, rho: float, x_start, settings: NewtonSettings | None = None):
    """Minimize the augmented Lagrangian in ``x`` for fixed ``(w, rho)``.

    Returns ``(x, iterations)`` with ``||grad||_inf <= settings.tol_inf``.
    Raises ``InnerSolveError`` on iteration or step-size exhaustion.
    """
    settings = settings or NewtonSettings()
    x = np.array(x_start, dtype=float)
    value = augmented_lagrangian_value(problem, x, w, rho)
    grad = augmented_lagrangian_gradient(problem, x, w, rho)
    for it in range(settings.max_iter + 1):
        grad_inf = norm_inf(grad)
        if grad_inf <= settings.tol_inf:
            return x, it
        if it == settings.max_iter:
            break
        try:
            d = newton_step(problem.hessian_operator(x, w, rho), grad, settings)
        except NotPositiveDefiniteError:
            d = -grad
        slope = inner(grad, d, problem.weight, problem.grid)
        if not slope < 0:
            d = -grad
            slope = inner(grad, d, problem.weight, problem.grid)

        t = 1.0
        while True:
            trial = x + t * d
            trial_value = augmented_lagrangian_value(problem, trial, w, rho)
            if trial_value <= value + settings.armijo_sigma * t * slope:
                trial_grad = augmented_lagrangian_gradient(problem, trial, w, rho)
                break
            # near the solution the decrease drowns in rounding; accept if the gradient shrinks
            if abs(trial_value - value) <= 64 * np.finfo(float).eps * max(1.0, abs(value)):
                trial_grad = augmented_lagrangian_gradient(problem, trial, w, rho)
                if norm_inf(trial_grad) < grad_inf:
                    break
            t *= settings.backtrack_factor
            if t < settings.min_step:
                raise InnerSolveError(
                    f"line search failed (||grad||_inf = {grad_inf:.3e})", x, it + 1, grad_inf
                )
        x, value, grad = trial, trial_value, trial_grad
    raise InnerSolveError(
        f"no convergence in {settings.max_iter} Newton steps (||grad||_inf = {grad_inf:.3e})",
        x, settings.max_iter, grad_inf,
    )

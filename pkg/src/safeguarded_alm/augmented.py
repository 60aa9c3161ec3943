"""Augmented Lagrangian and the elementary update rules of the outer loop."""

from __future__ import annotations

import enum

import numpy as np

from .fields import elementwise_min, norm2, norm_inf, positive_part


class SafeguardRule(enum.Enum):
    MIN_WITH_WMAX = "min-with-wmax"
    ZERO = "zero"


def _check_rho(rho: float) -> None:
    if not rho > 0:
        raise ValueError(f"penalty parameter must be positive, got {rho}")


def augmented_lagrangian_value(problem, x, w, rho: float) -> float:
    """``f(x) + rho/2 * ||(g(x) + w/rho)_+||**2`` in the problem's inner product."""
    _check_rho(rho)
    shifted = positive_part(problem.constraint(x) + np.asarray(w) / rho)
    return problem.objective(x) + 0.5 * rho * norm2(shifted, problem.weight, problem.grid) ** 2


def augmented_lagrangian_gradient(problem, x, w, rho: float) -> np.ndarray:
    """``grad f(x) + g'(x)^* (w + rho g(x))_+``."""
    _check_rho(rho)
    lam = multiplier_update(w, rho, problem.constraint(x))
    return problem.objective_gradient(x) + problem.constraint_adjoint_apply(x, lam)


def multiplier_update(w, rho: float, g_val) -> np.ndarray:
    return positive_part(np.asarray(w, dtype=float) + rho * np.asarray(g_val, dtype=float))


def complementarity_measure(g_val, w, rho: float, weight, grid=None) -> float:
    """``||min(-g, w/rho)||``, the quantity compared in the penalty test."""
    return norm2(elementwise_min(-np.asarray(g_val), np.asarray(w) / rho), weight, grid)


def penalty_test(v_new: float, v_old: float, tau: float) -> bool:
    """True when the penalty parameter may be kept, i.e. ``v_new <= tau * v_old``."""
    return v_new <= tau * v_old


def safeguard(lam, w_max, rule: SafeguardRule = SafeguardRule.MIN_WITH_WMAX) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if rule is SafeguardRule.ZERO:
        return np.zeros_like(lam)
    return np.minimum(lam, np.broadcast_to(np.asarray(w_max, dtype=float), lam.shape))


def kkt_residuals(problem, x, lam) -> tuple[float, float]:
    """Stationarity and complementarity residuals in the max-norm."""
    grad = problem.objective_gradient(x) + problem.constraint_adjoint_apply(x, lam)
    comp = elementwise_min(-problem.constraint(x), lam)
    return norm_inf(grad), norm_inf(comp)

"""Safeguarded augmented Lagrangian outer loop and its Moreau-Yosida variant."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .augmented import (
    SafeguardRule,
    complementarity_measure,
    kkt_residuals,
    multiplier_update,
    penalty_test,
    safeguard,
)
from .fields import elementwise_min, norm2, positive_part
from .newton import InnerSolveError, NewtonSettings, newton_solve

logger = logging.getLogger(__name__)

RHO_LIMIT = 1e16


class Variant(enum.Enum):
    SAFEGUARDED_ALM = "safeguarded-alm"
    MOREAU_YOSIDA = "moreau-yosida"


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_OUTER = "max-outer-reached"
    INNER_FAILURE = "inner-failure"


@dataclass
class SolverConfig:
    """Parameters of the outer loop.

    ``w_max``, ``lambda0`` and ``x0`` may be scalars (broadcast) or fields;
    ``lambda0=None`` and ``x0=None`` mean the zero field. ``inner_tol_schedule``
    overrides ``inner_tol`` per outer iteration (last entry repeats).
    """

    rho0: float = 1.0
    gamma: float = 10.0
    tau: float = 0.1
    w_max: float | np.ndarray = 1e6
    lambda0: float | np.ndarray | None = None
    x0: np.ndarray | None = None
    outer_tol: float = 1e-4
    inner_tol: float = 1e-6
    max_outer: int = 50
    variant: Variant = Variant.SAFEGUARDED_ALM
    safeguard_rule: SafeguardRule | None = None
    inner_tol_schedule: Sequence[float] | None = None

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.safeguard_rule is None:
            self.safeguard_rule = (SafeguardRule.ZERO if self.variant is Variant.MOREAU_YOSIDA
                                   else SafeguardRule.MIN_WITH_WMAX)
        self.safeguard_rule = SafeguardRule(self.safeguard_rule)
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if np.any(np.asarray(self.w_max) < 0):
            raise ValueError("w_max must be nonnegative")
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")
        if self.inner_tol_schedule is not None:
            sched = list(self.inner_tol_schedule)
            if not sched or any(e <= 0 for e in sched) or any(b > a for a, b in zip(sched, sched[1:])):
                raise ValueError("inner_tol_schedule must be a nonempty, positive, nonincreasing sequence")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def with_overrides(self, **overrides) -> "SolverConfig":
        unknown = set(overrides) - set(self.field_names())
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")
        return replace(self, **overrides)

    def inner_tolerance(self, k: int) -> float:
        if self.inner_tol_schedule is None:
            return self.inner_tol
        sched = list(self.inner_tol_schedule)
        return sched[min(k, len(sched) - 1)]


@dataclass
class IterationRecord:
    """State after outer iteration ``k`` (``k = 0`` is the starting point).

    ``rho`` is the penalty parameter that the next subproblem would use.
    """

    k: int
    rho: float
    feasibility: float
    complementarity_V: float
    kkt_grad_inf: float
    kkt_comp_inf: float
    inner_iterations: int
    multiplier_norm2: float
    penalty_kept: bool | None = None
    lambda_min: float = 0.0
    w_min: float = 0.0
    w_excess: float = 0.0
    identity_residual: float = 0.0


@dataclass
class SolveReport:
    status: Status
    outer_count: int
    total_inner_count: int
    final_rho: float
    final_x: np.ndarray
    final_lambda: np.ndarray
    trace: list[IterationRecord] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    multipliers: list[np.ndarray] = field(default_factory=list)
    safeguarded: list[np.ndarray] = field(default_factory=list)
    rhos_used: list[float] = field(default_factory=list)
    message: str = ""
    inner_weighting: str = "mesh-weighted"

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _as_field(value, dim: int) -> np.ndarray:
    if value is None:
        return np.zeros(dim)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"expected a field of length {dim}, got shape {arr.shape}")
    return arr.copy()


def solve(problem, config: SolverConfig | None = None,
          newton_settings: NewtonSettings | None = None) -> SolveReport:
    """Run the outer loop on ``problem``.

    Each outer iteration minimizes the augmented Lagrangian with semismooth
    Newton (warm-started at the current iterate), updates the multiplier,
    applies the penalty test and safeguards the multiplier. The stopping test
    is the max-norm KKT residual of ``(x^k, lambda^k)``; it is skipped for
    ``k = 0``.
    """
    config = config or SolverConfig()
    newton_settings = newton_settings or NewtonSettings(tol_inf=config.inner_tol)
    weight, grid = problem.weight, problem.grid
    dim, cdim = problem.dimension, problem.constraint_dimension

    x = _as_field(config.x0 if config.x0 is not None else problem.initial_point(), dim)
    lam = _as_field(config.lambda0, cdim)
    w_max = np.broadcast_to(np.asarray(config.w_max, dtype=float), (cdim,))
    rho = float(config.rho0)
    is_my = config.variant is Variant.MOREAU_YOSIDA

    g_val = problem.constraint(x)
    # k = 0 reference value: ||min(-g(x^0), 0)||
    v_old = complementarity_measure(g_val, np.zeros(cdim), 1.0, weight, grid)
    report = SolveReport(Status.MAX_OUTER, 0, 0, rho, x, lam, inner_weighting=weight.value)
    report.iterates.append(x)
    report.multipliers.append(lam)
    grad_inf, comp_inf = kkt_residuals(problem, x, lam)
    report.trace.append(IterationRecord(
        k=0, rho=rho, feasibility=norm2(positive_part(g_val), weight, grid),
        complementarity_V=v_old, kkt_grad_inf=grad_inf, kkt_comp_inf=comp_inf,
        inner_iterations=0, multiplier_norm2=norm2(lam, weight, grid), lambda_min=float(lam.min()),
    ))

    k = 0
    while True:
        if k > 0 and grad_inf <= config.outer_tol and comp_inf <= config.outer_tol:
            report.status = Status.CONVERGED
            break
        if k >= config.max_outer:
            report.status = Status.MAX_OUTER
            break
        if rho > RHO_LIMIT:
            report.status = Status.INNER_FAILURE
            report.message = f"penalty parameter exceeded {RHO_LIMIT:g}"
            break

        w = safeguard(lam, w_max, config.safeguard_rule)
        settings = replace(newton_settings, tol_inf=config.inner_tolerance(k))
        try:
            x_new, inner_its = newton_solve(problem, w, rho, x, settings)
        except InnerSolveError as exc:
            report.status = Status.INNER_FAILURE
            report.message = str(exc)
            report.total_inner_count += exc.iterations
            logger.warning("outer iteration %d: %s", k, exc)
            break

        g_new = problem.constraint(x_new)
        lam_new = multiplier_update(w, rho, g_new)
        v_new = complementarity_measure(g_new, w, rho, weight, grid)
        kept = penalty_test(v_new, v_old, config.tau)
        rho_next = rho * config.gamma if (is_my or not kept) else rho

        shifted = positive_part(g_new + w / rho)
        identity = w / rho - elementwise_min(-g_new, w / rho)
        identity_residual = float(np.max(np.abs(shifted - identity))) / max(1.0, float(np.max(w / rho)))

        x, lam = x_new, lam_new
        grad_inf, comp_inf = kkt_residuals(problem, x, lam)
        report.total_inner_count += inner_its
        report.rhos_used.append(rho)
        report.safeguarded.append(w)
        report.iterates.append(x)
        report.multipliers.append(lam)
        report.trace.append(IterationRecord(
            k=k + 1, rho=rho_next, feasibility=norm2(positive_part(g_new), weight, grid),
            complementarity_V=v_new, kkt_grad_inf=grad_inf, kkt_comp_inf=comp_inf,
            inner_iterations=inner_its, multiplier_norm2=norm2(lam, weight, grid),
            penalty_kept=kept, lambda_min=float(lam.min()), w_min=float(w.min()),
            w_excess=float(np.max(w - w_max)), identity_residual=identity_residual,
        ))
        logger.info("k=%d rho=%.1e inner=%d kkt=(%.2e, %.2e)", k + 1, rho, inner_its, grad_inf, comp_inf)
        v_old = v_new
        rho = rho_next
        k += 1

    report.outer_count = k
    report.final_rho = rho
    report.final_x = x
    report.final_lambda = lam
    return report

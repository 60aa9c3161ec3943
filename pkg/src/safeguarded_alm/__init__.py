"""Safeguarded augmented Lagrangian methods for lattice-constrained problems."""

from .alm import IterationRecord, SolveReport, SolverConfig, Status, Variant, solve
from .augmented import (
    SafeguardRule,
    augmented_lagrangian_gradient,
    augmented_lagrangian_value,
    kkt_residuals,
    multiplier_update,
    penalty_test,
    safeguard,
)
from .fields import (
    Grid,
    Weight,
    elementwise_max,
    elementwise_min,
    inner,
    negative_part,
    norm2,
    norm_inf,
    positive_part,
)
from .newton import InnerSolveError, NewtonSettings, SemismoothSystem, newton_solve, newton_step
from .problems import BratuProblem, ControlProblem, ObstacleProblem, QuadraticProgram, build_problem

__version__ = "0.1.0"

__all__ = [
    "BratuProblem", "ControlProblem", "Grid", "InnerSolveError", "IterationRecord",
    "NewtonSettings", "ObstacleProblem", "QuadraticProgram", "SafeguardRule", "SemismoothSystem",
    "SolveReport", "SolverConfig", "Status", "Variant", "Weight", "augmented_lagrangian_gradient",
    "augmented_lagrangian_value", "build_problem", "elementwise_max", "elementwise_min", "inner",
    "kkt_residuals", "multiplier_update", "negative_part", "newton_solve", "newton_step", "norm2",
    "norm_inf", "penalty_test", "positive_part", "safeguard", "solve",
]

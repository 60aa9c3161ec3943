"""Per-iteration optimality measures computed from a finished run."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import numpy as np

from .fields import elementwise_min, inner, negative_part, norm2, norm_inf, positive_part


@dataclass
class DiagnosticRecord:
    k: int
    akkt_grad: float
    akkt_comp: float
    feas_stationarity: float
    min_form: float
    pairing_form: float
    negpart_form: float
    lambda_norm2: float
    lambda_norm_inf: float


def akkt_measures(problem, x, lam) -> tuple[float, float]:
    """Stationarity residual ``||grad f + g'^* lam||_inf`` and pairing ``<lam, g_-(x)>``."""
    grad = problem.objective_gradient(x) + problem.constraint_adjoint_apply(x, lam)
    comp = inner(lam, negative_part(problem.constraint(x)), problem.weight, problem.grid)
    return norm_inf(grad), comp


def feasibility_stationarity(problem, x) -> float:
    """Norm of ``2 g'(x)^* g_+(x)``, the derivative of ``||g_+(x)||**2``."""
    viol = positive_part(problem.constraint(x))
    if not np.any(viol):
        return 0.0
    return norm2(2.0 * problem.constraint_adjoint_apply(x, viol), problem.weight, problem.grid)


def complementarity_variants(problem, x, lam) -> tuple[float, float, float]:
    """``(||min(-g, lam)||_inf, <lam, g>, <lam, g_->)``.

    These three measures are not equivalent in general; they agree in the
    limit only for bounded multipliers.
    """
    g_val = problem.constraint(x)
    w, grid = problem.weight, problem.grid
    return (
        norm_inf(elementwise_min(-g_val, lam)),
        inner(lam, g_val, w, grid),
        inner(lam, negative_part(g_val), w, grid),
    )


def diagnostic_trace(problem, report) -> list[DiagnosticRecord]:
    out = []
    for record, x, lam in zip(report.trace, report.iterates, report.multipliers):
        grad, comp = akkt_measures(problem, x, lam)
        min_form, pairing, negpart = complementarity_variants(problem, x, lam)
        out.append(DiagnosticRecord(
            k=record.k, akkt_grad=grad, akkt_comp=comp,
            feas_stationarity=feasibility_stationarity(problem, x),
            min_form=min_form, pairing_form=pairing, negpart_form=negpart,
            lambda_norm2=norm2(lam, problem.weight, problem.grid), lambda_norm_inf=norm_inf(lam),
        ))
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def trace_to_csv(report, diagnostics: list[DiagnosticRecord] | None = None) -> str:
    """One row per outer iteration: iteration record columns, then diagnostics."""
    rec_cols = [f.name for f in fields(type(report.trace[0]))] if report.trace else []
    diag_cols = [f.name for f in fields(DiagnosticRecord) if f.name != "k"] if diagnostics else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rec_cols + diag_cols)
    for i, record in enumerate(report.trace):
        row = [_fmt(v) for v in asdict(record).values()]
        if diagnostics:
            d = asdict(diagnostics[i])
            row += [_fmt(d[c]) for c in diag_cols]
        writer.writerow(row)
    return buf.getvalue()

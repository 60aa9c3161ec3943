"""Benchmark harness: single runs, iteration tables, field and trace dumps.

Examples::

    safeguarded-alm --problem obstacle --n 16 --variant alm
    safeguarded-alm --problem bratu --n-list 16,32,64 --variant both --table-format csv
    safeguarded-alm --config run.ini --dump out/
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .alm import SolverConfig, SolveReport, Variant, solve
from .diagnostics import diagnostic_trace, trace_to_csv
from .fields import field_to_csv
from .problems import PROBLEMS, build_problem

logger = logging.getLogger(__name__)

VARIANTS = {"alm": Variant.SAFEGUARDED_ALM, "my": Variant.MOREAU_YOSIDA}

# flag name -> SolverConfig field
OVERRIDE_FLAGS = {
    "tau": "tau", "gamma": "gamma", "rho0": "rho0", "wmax": "w_max",
    "tol": "outer_tol", "inner_tol": "inner_tol", "max_outer": "max_outer",
}
PROBLEM_FLAGS = ("alpha",)


@dataclass
class RunSpec:
    problem: str
    n: int
    variant: str = "alm"
    overrides: dict = field(default_factory=dict)
    problem_params: dict = field(default_factory=dict)
    dump: Path | None = None
    trace: Path | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 1 <= int(self.n) <= 1024:
            raise ValueError(f"n must lie in [1, 1024], got {self.n}")
        self.n = int(self.n)
        unknown = set(self.overrides) - set(SolverConfig.field_names())
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(variant=VARIANTS[self.variant], **self.overrides)


def run_benchmark(spec: RunSpec) -> SolveReport:
    """Build the problem, solve it and write the requested dumps."""
    problem = build_problem(spec.problem, spec.n, **spec.problem_params)
    report = solve(problem, spec.solver_config())
    stem = f"{spec.problem}_n{spec.n}_{spec.variant}"
    if spec.trace is not None:
        path = Path(spec.trace)
        if path.suffix != ".csv":
            path.mkdir(parents=True, exist_ok=True)
            path = path / f"{stem}_trace.csv"
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(trace_to_csv(report, diagnostic_trace(problem, report)).encode())
    if spec.dump is not None:
        out = Path(spec.dump)
        out.mkdir(parents=True, exist_ok=True)
        grid = problem.grid
        field_to_csv(report.final_x, grid, out / f"{stem}_solution.csv")
        field_to_csv(report.final_lambda, grid, out / f"{stem}_multiplier.csv")
        if spec.problem == "control":
            y = problem.state_solve(report.final_x)
            field_to_csv(y, grid, out / f"{stem}_state.csv")
            p = problem.adjoint_solve(y, y - problem.y_d - report.final_lambda)
            field_to_csv(p, grid, out / f"{stem}_adjoint.csv")
    return report


@dataclass
class TableRow:
    n: int
    results: dict  # variant -> SolveReport | Exception


@dataclass
class Table:
    problem: str
    variants: list
    rows: list

    @property
    def all_converged(self) -> bool:
        return all(isinstance(r, SolveReport) and r.converged
                   for row in self.rows for r in row.results.values())

    @staticmethod
    def _cells(result, rho_fmt) -> list[str]:
        if isinstance(result, SolveReport):
            cells = [str(result.outer_count), str(result.total_inner_count), rho_fmt(result.final_rho)]
            if not result.converged:
                cells[0] += f" ({result.status.value})"
            return cells
        return ["failed", "-", "-"]

    def to_markdown(self) -> str:
        header = ["n"]
        for v in self.variants:
            header += [f"{v} outer", f"{v} inner", f"{v} final rho"]
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for row in self.rows:
            cells = [str(row.n)]
            for v in self.variants:
                cells += self._cells(row.results[v], lambda r: f"{r:.0e}")
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["n"]
        for v in self.variants:
            header += [f"{v}_outer", f"{v}_inner", f"{v}_final_rho", f"{v}_status"]
        writer.writerow(header)
        for row in self.rows:
            cells = [row.n]
            for v in self.variants:
                r = row.results[v]
                if isinstance(r, SolveReport):
                    cells += [r.outer_count, r.total_inner_count, f"{r.final_rho:.17g}", r.status.value]
                else:
                    cells += ["", "", "", f"error: {r}"]
            writer.writerow(cells)
        return buf.getvalue()


def run_table(problem: str, n_list, both_variants: bool = True, variant: str = "alm",
              overrides: dict | None = None, problem_params: dict | None = None,
              dump=None, trace=None, threads: int | None = None) -> Table:
    """Run every ``(n, variant)`` combination; failures are recorded, not raised."""
    variants = list(VARIANTS) if both_variants else [variant]
    n_list = list(n_list)
    jobs = [(n, v) for n in n_list for v in variants]
    if threads is None:
        threads = int(os.environ.get("ALM_THREADS", "1"))

    def run(job):
        n, v = job
        try:
            return run_benchmark(RunSpec(problem, n, v, dict(overrides or {}),
                                         dict(problem_params or {}), dump, trace))
        except Exception as exc:  # a failed row must not abort the table
            logger.error("%s n=%d %s failed: %s", problem, n, v, exc)
            return exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, jobs))
    rows = [TableRow(n, {}) for n in n_list]
    for i, ((n, v), res) in enumerate(zip(jobs, results)):
        rows[i // len(variants)].results[v] = res
    return Table(problem, variants, rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safeguarded-alm", description=__doc__.split("\n")[0])
    p.add_argument("--config", type=Path, help="INI file with a [run] section; flags override it")
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--n", type=int)
    p.add_argument("--n-list", help="comma-separated grid sizes (table mode)")
    p.add_argument("--variant", choices=["alm", "my", "both"])
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--rho0", type=float)
    p.add_argument("--wmax", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--inner-tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--alpha", type=float, help="problem parameter alpha")
    p.add_argument("--dump", type=Path, help="directory for solution/multiplier CSV dumps")
    p.add_argument("--trace", type=Path, help="trace CSV file or directory")
    p.add_argument("--table-format", choices=["md", "csv"])
    p.add_argument("-v", "--verbose", action="store_true")
    return p


INT_KEYS = {"n", "max_outer"}
FLOAT_KEYS = {"tau", "gamma", "rho0", "wmax", "tol", "inner_tol", "alpha"}


def read_config(path: Path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    section = parser["run"] if parser.has_section("run") else parser.defaults()
    out = {}
    for key, raw in section.items():
        key = key.replace("-", "_")
        if key in INT_KEYS:
            out[key] = int(raw)
        elif key in FLOAT_KEYS:
            out[key] = float(raw)
        elif key in {"problem", "variant", "n_list", "dump", "trace", "table_format"}:
            out[key] = raw
        else:
            raise ValueError(f"unknown config key {key!r} in {path}")
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    settings = read_config(args.config) if args.config else {}
    settings.update({k: v for k, v in vars(args).items() if v is not None and k not in ("config", "verbose")})

    problem = settings.get("problem")
    if problem is None:
        print("error: --problem is required", file=sys.stderr)
        return 2
    overrides = {OVERRIDE_FLAGS[k]: settings[k] for k in OVERRIDE_FLAGS if k in settings}
    params = {k: settings[k] for k in PROBLEM_FLAGS if k in settings}
    variant = settings.get("variant", "alm")
    fmt = settings.get("table_format", "md")
    dump = Path(settings["dump"]) if settings.get("dump") else None
    trace = Path(settings["trace"]) if settings.get("trace") else None

    if "n_list" in settings:
        text = str(settings["n_list"]).strip()
        n_list = [int(t) for t in text.split(",") if t.strip()]
    elif "n" in settings:
        n_list = [settings["n"]]
    else:
        print("error: --n or --n-list is required", file=sys.stderr)
        return 2
    try:
        for n in n_list:
            RunSpec(problem, n, "alm" if variant == "both" else variant, overrides, params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    table = run_table(problem, n_list, both_variants=variant == "both",
                      variant="alm" if variant == "both" else variant,
                      overrides=overrides, problem_params=params, dump=dump, trace=trace)
    sys.stdout.write(table.to_csv() if fmt == "csv" else table.to_markdown())
    return 0 if table.all_converged else 1


if __name__ == "__main__":
    sys.exit(main())

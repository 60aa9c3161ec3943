"""Sparse operators for the five-point Laplacian and SPD linear solves.

Matrices are ``scipy.sparse.csr_matrix`` instances. Direct solves use SuperLU
in symmetric mode with diagonal pivoting disabled, so the factorization is an
LDL^T in disguise and its pivot signs certify positive definiteness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .fields import Grid


class LinearSolveError(RuntimeError):
    """Raised when a linear solve fails; ``residual`` holds the last relative residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NotPositiveDefiniteError(LinearSolveError):
    pass


class Method(enum.Enum):
    DIRECT = "direct-factorization"
    CG = "conjugate-gradient"


@dataclass(frozen=True)
class LinearSolveSettings:
    method: Method = Method.DIRECT
    cg_tolerance: float = 1e-12
    cg_max_iter: int = 10_000

    def __post_init__(self):
        if not self.cg_tolerance > 0:
            raise ValueError("cg_tolerance must be positive")
        if self.cg_max_iter < 1:
            raise ValueError("cg_max_iter must be positive")


def assemble_laplacian(grid: Grid) -> sp.csr_matrix:
    """Five-point discretization of ``-Laplace`` with Dirichlet boundary, scaled by ``1/h**2``."""
    n = grid.n
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    t = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    eye = sp.identity(n, format="csr")
    a = (sp.kron(eye, t) + sp.kron(t, eye)) / grid.h**2
    a = sp.csr_matrix(a)
    a.sort_indices()
    a.eliminate_zeros()
    return a


def apply(a: sp.spmatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if a.shape[1] != x.size:
        raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {x.size}")
    return np.asarray(a @ x).ravel()


def add_diagonal(a: sp.spmatrix, d) -> sp.csr_matrix:
    d = np.asarray(d, dtype=float)
    if a.shape != (d.size, d.size):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, diagonal {d.size}")
    out = sp.csr_matrix(a + sp.diags(d, format="csr"))
    out.sort_indices()
    return out


def is_symmetric(a: sp.spmatrix, tol: float = 0.0) -> bool:
    diff = abs(a - a.T)
    return diff.nnz == 0 or diff.max() <= tol


class SPDFactor:
    """Sparse LDL^T-style factorization of a symmetric positive definite matrix.

    Raises ``NotPositiveDefiniteError`` if a pivot is not strictly positive,
    which is how indefinite Newton matrices are detected.
    """

    def __init__(self, a: sp.spmatrix):
        a = sp.csc_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got {a.shape}")
        self.shape = a.shape
        try:
            self._lu = sla.splu(
                a,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options=dict(SymmetricMode=True),
            )
        except RuntimeError as exc:  # exactly singular
            raise NotPositiveDefiniteError(f"factorization breakdown: {exc}") from exc
        pivots = self._lu.U.diagonal()
        if not np.array_equal(self._lu.perm_r, self._lu.perm_c) or not np.all(pivots > 0):
            raise NotPositiveDefiniteError("matrix is not positive definite")

    def solve(self, rhs) -> np.ndarray:
        return self._lu.solve(np.asarray(rhs, dtype=float))


def _solve_cg(a: sp.spmatrix, rhs: np.ndarray, settings: LinearSolveSettings) -> np.ndarray:
    diag = a.diagonal()
    if np.any(diag <= 0):
        raise NotPositiveDefiniteError("nonpositive diagonal entry; matrix is not SPD")
    precond = sla.LinearOperator(a.shape, matvec=lambda v: v / diag)
    x, info = sla.cg(
        a, rhs, rtol=settings.cg_tolerance, atol=0.0,
        maxiter=settings.cg_max_iter, M=precond,
    )
    rnorm = np.linalg.norm(rhs)
    residual = np.linalg.norm(a @ x - rhs) / rnorm if rnorm > 0 else 0.0
    if info != 0:
        raise LinearSolveError(f"CG did not converge in {settings.cg_max_iter} iterations", residual)
    return x


def solve_spd(a: sp.spmatrix, rhs, settings: LinearSolveSettings | None = None) -> np.ndarray:
    """Solve ``a @ x = rhs`` for symmetric positive definite ``a``."""
    settings = settings or LinearSolveSettings()
    rhs = np.asarray(rhs, dtype=float)
    if a.shape != (rhs.size, rhs.size):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, rhs {rhs.size}")
    if not np.any(rhs):
        return np.zeros_like(rhs)
    if settings.method is Method.CG:
        return _solve_cg(sp.csr_matrix(a), rhs, settings)
    return SPDFactor(a).solve(rhs)

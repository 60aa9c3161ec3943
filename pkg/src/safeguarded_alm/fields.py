"""Uniform interior grids on the unit square and lattice operations on fields.

A field is a plain 1-D ``numpy`` array of length ``n**2`` holding values at the
interior lattice points in row-major order. Boundary values are homogeneous
Dirichlet and never stored.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class Weight(enum.Enum):
    """Inner-product weighting used for discrete L2 quantities."""

    UNWEIGHTED = "unweighted"
    MESH = "mesh-weighted"


@dataclass(frozen=True)
class Grid:
    """Interior lattice of (0, 1)^2 with ``n`` points per row and column."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid size must be a positive integer, got {self.n!r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def size(self) -> int:
        return self.n * self.n

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Return flattened ``(x1, x2)`` coordinates; ``x1`` varies along a row."""
        t = np.arange(1, self.n + 1) * self.h
        x2, x1 = np.meshgrid(t, t, indexing="ij")
        return x1.ravel(), x2.ravel()

    def zeros(self) -> np.ndarray:
        return np.zeros(self.size)

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.size, float(value))

    def from_function(self, fun) -> np.ndarray:
        """Sample ``fun(x1, x2)`` (vectorized) at the interior points."""
        x1, x2 = self.coordinates()
        return np.asarray(fun(x1, x2), dtype=float) * np.ones(self.size)

    def as_image(self, z: np.ndarray) -> np.ndarray:
        return check_field(z, self).reshape(self.n, self.n)

    def weight_factor(self, weight: Weight) -> float:
        return self.h**2 if weight is Weight.MESH else 1.0


def check_field(z, grid: Grid | None = None) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError(f"fields are 1-D arrays, got shape {z.shape}")
    if grid is not None and z.size != grid.size:
        raise ValueError(f"field of length {z.size} does not live on a grid with n={grid.n}")
    return z


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = check_field(a)
    b = check_field(b)
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: fields of length {a.size} and {b.size}")
    return a, b


def positive_part(z) -> np.ndarray:
    """Componentwise ``max(z, 0)``."""
    # `+ 0.0` maps -0.0 to +0.0 so ties at zero return a positive zero
    return np.maximum(check_field(z), 0.0) + 0.0


def negative_part(z) -> np.ndarray:
    """Componentwise ``max(-z, 0)``, so that ``z = z+ - z-``."""
    return np.maximum(-check_field(z), 0.0) + 0.0


def elementwise_min(a, b) -> np.ndarray:
    a, b = _check_pair(a, b)
    return np.minimum(a, b)


def elementwise_max(a, b) -> np.ndarray:
    a, b = _check_pair(a, b)
    return np.maximum(a, b)


def inner(a, b, weight: Weight = Weight.MESH, grid: Grid | None = None) -> float:
    """Discrete inner product.

    With ``Weight.MESH`` the Euclidean product is scaled by ``h**2``; the
    grid is inferred from the field length when not given. Unweighted
    products accept vectors of any length.
    """
    a, b = _check_pair(a, b)
    if weight is Weight.UNWEIGHTED:
        return float(np.dot(a, b))
    if grid is None:
        grid = grid_of(a)
    elif grid.size != a.size:
        raise ValueError(f"field of length {a.size} does not live on a grid with n={grid.n}")
    return float(grid.h**2 * np.dot(a, b))


def norm2(a, weight: Weight = Weight.MESH, grid: Grid | None = None) -> float:
    return float(np.sqrt(max(inner(a, a, weight, grid), 0.0)))


def norm_inf(a) -> float:
    a = check_field(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def grid_of(z) -> Grid:
    """Grid carrying a field of the given length; fails unless it is a square."""
    size = check_field(z).size
    n = int(round(np.sqrt(size)))
    if n < 1 or n * n != size:
        raise ValueError(f"field length {size} is not a perfect square")
    return Grid(n)


def field_to_csv(z, grid: Grid, path: str | Path | None = None) -> str:
    """Serialize a field as CSV: one line per lattice row, 17 significant digits."""
    image = grid.as_image(z)
    buf = io.StringIO()
    for row in image:
        buf.write(",".join(f"{v:.17g}" for v in row))
        buf.write("\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_bytes(text.encode())
    return text


def field_from_csv(text: str) -> np.ndarray:
    rows = [line for line in text.splitlines() if line.strip()]
    values = [[float(v) for v in line.split(",")] for line in rows]
    image = np.array(values, dtype=float)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError(f"expected a square table, got shape {image.shape}")
    return image.ravel()

"""Uniform partitions of the size domain and the maps between functions and R^n.

A :class:`Grid` splits ``[0, x_max]`` into ``n`` cells of width ``dx``. Cell
``i`` (1-based) is the half-open interval ``(x_{i-1}, x_i]``; the first cell
also owns ``x = 0``. Functions are represented by their cell averages, which is
the orthogonal projection onto piecewise constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DomainError, EvaluationError

__all__ = ["Grid", "GridVector", "project", "embed", "moments", "coeffs_of", "sup_error"]


@dataclass(frozen=True)
class Grid:
    """Uniform partition of ``[0, x_max]`` into ``n`` cells."""

    n: int
    x_max: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid dimension must be a positive integer, got {self.n!r}")
        if not np.isfinite(self.x_max) or self.x_max <= 0:
            raise ValueError(f"x_max must be positive and finite, got {self.x_max!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def dx(self) -> float:
        return self.x_max / self.n

    @cached_property
    def edges(self) -> np.ndarray:
        """All ``n + 1`` partition points ``x_0 = 0, ..., x_n = x_max``."""
        e = self.dx * np.arange(self.n + 1)
        e[-1] = self.x_max
        return e

    @cached_property
    def nodes(self) -> np.ndarray:
        """Right endpoints ``x_1, ..., x_n``; rates are sampled here."""
        return self.edges[1:]

    @cached_property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def cell_of(self, x: float) -> int:
        """0-based index of the cell containing ``x``."""
        if not (0.0 <= x <= self.x_max):
            raise DomainError(f"x = {x!r} outside [0, {self.x_max}]")
        if x == 0.0:
            return 0
        i = int(np.ceil(x / self.dx)) - 1
        # guard against ceil landing one cell off at a node
        if i > 0 and x <= self.edges[i]:
            i -= 1
        elif i < self.n - 1 and x > self.edges[i + 1]:
            i += 1
        return min(max(i, 0), self.n - 1)


@dataclass(frozen=True)
class GridVector:
    """Coefficients ``alpha_i`` of a piecewise-constant function on ``grid``."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def l1_norm(self) -> float:
        """L1 norm of the embedded function, ``dx * sum |alpha_i|``."""
        return self.grid.dx * float(np.abs(self.coeffs).sum())


def coeffs_of(u) -> np.ndarray:
    """Coefficient array of a :class:`GridVector` or anything array-like."""
    if isinstance(u, GridVector):
        return u.coeffs
    return np.asarray(u, dtype=float)


def project(f: Callable, grid: Grid, points: int = 8) -> GridVector:
    """Cell averages of ``f`` by ``points``-node Gauss-Legendre quadrature per cell.

    ``f`` must accept a numpy array. Nodes are interior to each cell, so rates
    that are singular at the partition points can still be projected.
    """
    t, w = np.polynomial.legendre.leggauss(points)
    left = grid.edges[:-1]
    xs = left[:, None] + 0.5 * grid.dx * (t[None, :] + 1.0)
    vals = np.asarray(f(xs), dtype=float)
    if vals.shape != xs.shape:
        vals = np.broadcast_to(vals, xs.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        cell = int(np.argmax(bad.any(axis=1)))
        raise EvaluationError(
            f"non-finite value in cell {cell + 1} ({grid.edges[cell]:g}, {grid.edges[cell + 1]:g}]"
        )
    return GridVector(grid, 0.5 * vals @ w)


def embed(v: GridVector, x: float) -> float:
    """Value of the piecewise-constant function ``E_n v`` at ``x``."""
    return float(v.coeffs[v.grid.cell_of(x)])


def moments(v: GridVector) -> tuple[float, float]:
    """Zeroth and first moments (total number, total mass) of ``E_n v``."""
    g = v.grid
    a = v.coeffs
    m0 = g.dx * float(a.sum())
    m1 = 0.5 * g.dx * float(a @ (g.edges[1:] + g.edges[:-1]))
    return m0, m1


def sup_error(v: GridVector, f: Callable, samples_per_cell: int = 16) -> float:
    """``sup_x |E_n v(x) - f(x)|`` estimated on both cell ends and interior samples.

    Exact whenever ``f`` is monotone on every cell.
    """
    g = v.grid
    s = np.linspace(0.0, 1.0, samples_per_cell + 1)
    xs = g.edges[:-1, None] + g.dx * s[None, :]
    fx = np.asarray(f(xs), dtype=float)
    return float(np.abs(fx - v.coeffs[:, None]).max())

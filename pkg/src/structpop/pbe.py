"""Discrete population balance operator ``F_n(u) = G_n u + A_n(u) + B_n u``.

With 1-based indices and every rate sampled at the right cell endpoints:

* aggregation, row ``i``::

      1/2 sum_{j=1}^{i-1} k_a(x_j, x_{i-j}) u_j u_{i-j} dx  -  u_i sum_{j=1}^{n-i} k_a(x_i, x_j) u_j dx

  Merges whose product would fall beyond ``x_max`` are simply not counted, so
  the first moment ``sum x_i A_i`` vanishes identically.
* breakage, row ``i``::

      sum_{j=i+1}^{n} gamma(x_i; x_j) k_f(x_j) u_j dx  -  1/2 k_f(x_i) u_i

All kernel samples are tabulated once by :func:`assemble`; evaluating the
operator or its Jacobian performs no rate calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sinko
from .errors import NumericalError
from .grid import Grid, coeffs_of
from .model import PBERates

__all__ = [
    "PBEOperator",
    "assemble",
    "apply_aggregation",
    "apply_breakage",
    "apply",
    "jacobian",
]


@dataclass(frozen=True, eq=False)
class PBEOperator:
    """Assembled operator.

    ``agg_table[j, k] = k_a(x_{j+1}, x_{k+1}) dx`` (0-based storage);
    ``loss_table`` is the same table restricted to admissible pairs
    ``j + k + 2 <= n``, whose merger stays on the grid. ``pair_row/pair_j/pair_k``
    enumerate those pairs together with the row ``j + k + 1`` their merger
    lands in. ``frag_matrix`` is the full breakage matrix.
    """

    grid: Grid
    rates: PBERates
    gn: np.ndarray
    agg_table: np.ndarray
    loss_table: np.ndarray
    frag_matrix: np.ndarray
    pair_row: np.ndarray
    pair_j: np.ndarray
    pair_k: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.n

    def apply(self, u) -> np.ndarray:
        return apply(self, u)

    def jacobian(self, u) -> np.ndarray:
        return jacobian(self, u)


def assemble(grid: Grid, rates: PBERates) -> PBEOperator:
    n, dx = grid.n, grid.dx
    x = grid.nodes
    gn = sinko.assemble(grid, rates).matrix

    idx = np.arange(n)
    admissible = (idx[:, None] + idx[None, :] + 2) <= n
    ka = np.asarray(rates.k_a(x[:, None], x[None, :]), dtype=float)
    ka = np.broadcast_to(ka, (n, n))
    agg = ka * dx
    loss = np.where(admissible, agg, 0.0)

    kf = np.broadcast_to(np.asarray(rates.k_f(x), dtype=float), (n,))
    gam = np.broadcast_to(np.asarray(rates.gamma(x[:, None], x[None, :]), dtype=float), (n, n))
    frag = np.triu(gam * kf[None, :] * dx, k=1)
    frag[idx, idx] = -0.5 * kf

    for name, arr in (("aggregation kernel", agg), ("breakage table", frag)):
        if not np.isfinite(arr).all():
            raise NumericalError(f"{name} has non-finite entries")

    pj, pk = np.nonzero(admissible)
    prow = pj + pk + 1
    for arr in (agg, loss, frag):
        arr.setflags(write=False)
    return PBEOperator(grid, rates, gn, agg, loss, frag, prow, pj, pk)


def apply_aggregation(op: PBEOperator, u) -> np.ndarray:
    a = coeffs_of(u)
    w = op.agg_table[op.pair_j, op.pair_k] * a[op.pair_j] * a[op.pair_k]
    gain = 0.5 * np.bincount(op.pair_row, weights=w, minlength=op.n)
    return gain - a * (op.loss_table @ a)


def apply_breakage(op: PBEOperator, u) -> np.ndarray:
    return op.frag_matrix @ coeffs_of(u)


def apply(op: PBEOperator, u) -> np.ndarray:
    a = coeffs_of(u)
    return op.gn @ a + apply_aggregation(op, a) + op.frag_matrix @ a


def aggregation_jacobian(op: PBEOperator, u) -> np.ndarray:
    """Derivative of :func:`apply_aggregation` at ``u``.

    Gain row ``i`` gets ``k_a(x_m, x_{i-m}) u_{i-m} dx`` in column ``m < i``;
    loss contributes ``-u_i k_a(x_i, x_m) dx`` for ``m <= n - i`` plus
    ``-sum_j k_a(x_i, x_j) u_j dx`` on the diagonal.
    """
    a = coeffs_of(u)
    n = op.n
    jac = -a[:, None] * op.loss_table
    jac[np.arange(n), np.arange(n)] -= op.loss_table @ a
    # each (row, j) occurs at most once among the admissible pairs
    jac[op.pair_row, op.pair_j] += op.agg_table[op.pair_j, op.pair_k] * a[op.pair_k]
    return jac


def jacobian(op: PBEOperator, u) -> np.ndarray:
    """``J_F(u) = G_n + J_A(u) + J_B``; the breakage part does not depend on ``u``."""
    return op.gn + aggregation_jacobian(op, u) + op.frag_matrix

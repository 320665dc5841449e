"""Linear Sinko-Streifer model: generator matrix, exact stationary solution,
renewal balance and the discrete steady state.

The discrete generator on ``n`` cells is upwind transport with all renewal
entering the first cell::

    row 1:    -g_1/dx - mu_1 + q_1,  q_2, ..., q_n
    row i>1:  g_{i-1}/dx at column i-1,  -g_i/dx - mu_i on the diagonal

with every rate sampled at the right cell endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import linalg
from .errors import DegenerateNullspaceError, NoSteadyStateError, NumericalError
from .grid import Grid, GridVector, coeffs_of
from .model import SinkoRates
from .solve import SteadyState

__all__ = [
    "SinkoOperator",
    "assemble",
    "exact_steady_state",
    "necessary_condition",
    "renewal_number",
    "steady_state",
]

EXISTENCE_TOL = 1e-2


@dataclass(frozen=True)
class SinkoOperator:
    grid: Grid
    rates: SinkoRates
    matrix: np.ndarray

    def apply(self, u) -> np.ndarray:
        return self.matrix @ coeffs_of(u)

    def jacobian(self, u=None) -> np.ndarray:
        return self.matrix


def assemble(grid: Grid, rates: SinkoRates) -> SinkoOperator:
    x = grid.nodes
    n = grid.n
    q = np.broadcast_to(np.asarray(rates.q(x), dtype=float), (n,))
    g = np.broadcast_to(np.asarray(rates.g(x), dtype=float), (n,))
    mu = np.broadcast_to(np.asarray(rates.mu(x), dtype=float), (n,))
    for name, v in (("q", q), ("g", g), ("mu", mu)):
        if not np.isfinite(v).all():
            raise NumericalError(f"rate {name} is not finite on the grid nodes")
    flux = g / grid.dx
    m = np.diag(-flux - mu)
    m[np.arange(1, n), np.arange(n - 1)] = flux[:-1]
    m[0, :] += q
    m.setflags(write=False)
    return SinkoOperator(grid, rates, m)


def _survival_exponent(rates: SinkoRates, x: float) -> float:
    """``int_0^x mu(s)/g(s) ds``."""
    if x == 0.0:
        return 0.0
    val, _ = quad(lambda s: float(rates.mu(s)) / float(rates.g(s)), 0.0, x, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val


def necessary_condition(rates: SinkoRates, x_max: float = 1.0) -> float:
    """Renewal integral ``int_0^x_max (q/g) exp(-int_0^x mu/g) dx``.

    A nontrivial stationary solution can exist only when this equals one.
    """

    def integrand(x):
        return float(rates.q(x)) / float(rates.g(x)) * math.exp(-_survival_exponent(rates, x))

    val, err = quad(integrand, 0.0, x_max, epsabs=1e-12, epsrel=1e-10, limit=200, full_output=False)
    if not math.isfinite(val):
        raise NumericalError("renewal integral quadrature failed")
    return val


def exact_steady_state(rates: SinkoRates, x, x_max: float = 1.0, check_tol: float = 1e-6):
    """Stationary density ``exp(-int_0^x mu/g) / g(x)``, normalised so that
    the total renewal flux ``int q u`` equals one.

    Raises :class:`NoSteadyStateError` unless the renewal integral is within
    ``check_tol`` of one.
    """
    r = necessary_condition(rates, x_max)
    if abs(r - 1.0) > check_tol:
        raise NoSteadyStateError(r)
    xs = np.asarray(x, dtype=float)
    flat = [math.exp(-_survival_exponent(rates, float(xi))) / float(rates.g(xi)) for xi in xs.ravel()]
    out = np.asarray(flat).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def renewal_number(op: SinkoOperator) -> float:
    """Discrete counterpart of :func:`necessary_condition` for the assembled grid.

    Solving rows 2..n of ``G_n u = 0`` from ``u_1 = 1`` fixes the shape of the
    only candidate steady state; row 1 balances iff this number equals one.
    """
    grid, rates = op.grid, op.rates
    x = grid.nodes
    q = np.broadcast_to(np.asarray(rates.q(x), dtype=float), (grid.n,))
    g = np.broadcast_to(np.asarray(rates.g(x), dtype=float), (grid.n,))
    mu = np.broadcast_to(np.asarray(rates.mu(x), dtype=float), (grid.n,))
    out = g / grid.dx + mu
    ratio = np.ones(grid.n)
    ratio[1:] = (g[:-1] / grid.dx) / out[1:]
    shape = np.cumprod(ratio)
    return float(q @ shape / out[0])


def steady_state(
    op: SinkoOperator,
    existence_tol: float = EXISTENCE_TOL,
    rank_tol: float = 1e-10,
) -> SteadyState | None:
    """Nontrivial stationary solution of the discrete model, or ``None``.

    A steady state exists when the discrete renewal number is within
    ``existence_tol`` of one. Its shape is the right singular vector of the
    smallest singular value (the numerical nullspace of ``G_n``), made
    nonnegative and scaled so that ``dx * sum q(x_i) u_i = 1``.

    Raises :class:`DegenerateNullspaceError` when more than one singular value
    falls below ``rank_tol * sigma_max``.
    """
    if abs(renewal_number(op) - 1.0) > existence_tol:
        return None
    m = op.matrix
    s = linalg.singular_values(m)
    if s[0] == 0.0:
        raise DegenerateNullspaceError(op.grid.n)
    small = int((s <= rank_tol * s[0]).sum())
    if small > 1:
        raise DegenerateNullspaceError(small)
    # admit exactly the smallest singular direction
    tol = max(rank_tol, s[-1] / s[0] * (1.0 + 1e-9))
    basis = linalg.nullspace(m, rank_tol=tol)
    if len(basis) != 1:
        raise DegenerateNullspaceError(len(basis))
    v = basis[0]
    v = v * np.sign(v.sum())
    q = np.asarray(op.rates.q(op.grid.nodes), dtype=float)
    flux = op.grid.dx * float(q @ v)
    if flux <= 0:
        return None
    v = v / flux
    state = GridVector(op.grid, v)
    scale = float(np.abs(v).max())
    return SteadyState(
        state=state,
        residual_norm=float(np.linalg.norm(m @ v)),
        positive=bool(v.min() >= -1e-8 * scale),
        seed_index=None,
        iterations=0,
    )

"""Steady states of ``u' = F(u)`` by trust-region dogleg Newton, and time integration.

The root finder follows Powell's hybrid scheme: each iteration combines the
Newton step and the (scaled) steepest-descent Cauchy step inside a trust
region, with variable scaling taken from the running maximum of Jacobian
column norms. The exact Jacobian is supplied by the operator.

Any operator with ``grid``, ``apply(u)`` and ``jacobian(u)`` works here, so the
linear Sinko-Streifer operator can be integrated the same way as the PBE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import SingularMatrixError, StiffnessError
from .grid import Grid, GridVector, coeffs_of, moments
from .linalg import solve_linear

logger = logging.getLogger(__name__)

__all__ = [
    "SteadyState",
    "Trajectory",
    "RootResult",
    "default_seeds",
    "default_tol",
    "dogleg_newton",
    "find_steady_state",
    "integrate",
]

POS_TOL = 1e-8
MIN_L1 = 1e-6


class Operator(Protocol):
    grid: Grid

    def apply(self, u) -> np.ndarray: ...

    def jacobian(self, u) -> np.ndarray: ...


@dataclass(frozen=True)
class SteadyState:
    """A converged stationary state.

    ``seed_index`` is the position in the seed list that converged (``None``
    for direct linear solves); ``history`` the residual norm per iteration.
    """

    state: GridVector
    residual_norm: float
    positive: bool
    seed_index: int | None
    iterations: int
    history: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class Trajectory:
    grid: Grid
    times: np.ndarray
    states: np.ndarray  # shape (len(times), n)
    m0: np.ndarray
    m1: np.ndarray

    def state_at(self, k: int) -> GridVector:
        return GridVector(self.grid, self.states[k])

    @property
    def min_value(self) -> float:
        return float(self.states.min())


@dataclass
class RootResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    history: list
    message: str = ""


def default_tol(n: int) -> float:
    return 1e-8 * math.sqrt(n)


def default_seeds(grid: Grid, count: int = 10) -> list[GridVector]:
    """Constant states ``2**i``, ``i = 0, ..., count - 1``."""
    return [GridVector(grid, np.full(grid.n, 2.0**i)) for i in range(count)]


def _dogleg(jac: np.ndarray, f: np.ndarray, diag: np.ndarray, delta: float, damping: float) -> np.ndarray:
    """Minimiser of ``||f + J p||`` along the dogleg path with ``||D p|| <= delta``."""
    if damping:
        jac = jac + damping * np.eye(jac.shape[0])
    p_gn = solve_linear(jac, -f)
    if np.linalg.norm(diag * p_gn) <= delta:
        return p_gn
    # steepest descent direction in the scaled variables z = D p
    g = -(jac.T @ f) / diag
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        return p_gn * (delta / np.linalg.norm(diag * p_gn))
    jg = jac @ (g / diag)
    t = gnorm**2 / max(float(jg @ jg), np.finfo(float).tiny)
    if t * gnorm >= delta:
        return (delta / gnorm) * g / diag
    a = t * g
    d = diag * p_gn - a
    # |a + s d| = delta, s in [0, 1]
    aa, ad, dd = a @ a, a @ d, d @ d
    s = (-ad + math.sqrt(max(ad * ad - dd * (aa - delta * delta), 0.0))) / dd
    return (a + s * d) / diag


def dogleg_newton(
    op: Operator,
    x0,
    tol: float,
    max_iter: int = 200,
    factor: float = 100.0,
    damping: float = 0.0,
) -> RootResult:
    """Solve ``op.apply(x) = 0`` from ``x0``.

    Raises :class:`SingularMatrixError` when the (possibly damped) Jacobian is
    singular at an iterate.
    """
    x = np.array(coeffs_of(x0), dtype=float)
    f = op.apply(x)
    fn = float(np.linalg.norm(f))
    history = [fn]
    if not math.isfinite(fn):
        return RootResult(x, fn, 0, False, history, "non-finite residual at seed")
    jac = op.jacobian(x)
    diag = np.linalg.norm(jac, axis=0)
    diag[diag == 0.0] = 1.0
    delta = factor * float(np.linalg.norm(diag * x)) or factor
    damp = damping * max(1.0, float(np.abs(jac).sum(axis=1).max())) if damping else 0.0
    it = 0
    while fn > tol:
        if it >= max_iter:
            return RootResult(x, fn, it, False, history, "iteration limit")
        it += 1
        p = _dogleg(jac, f, diag, delta, damp)
        pnorm = float(np.linalg.norm(diag * p))
        if it == 1:
            delta = min(delta, pnorm)
        x_new = x + p
        f_new = op.apply(x_new)
        fn_new = float(np.linalg.norm(f_new))
        lin = float(np.linalg.norm(f + jac @ p))
        pred = 1.0 - (lin / fn) ** 2
        actual = 1.0 - (fn_new / fn) ** 2 if math.isfinite(fn_new) else -math.inf
        ratio = actual / pred if pred > 0 else -1.0

        if ratio < 0.1:
            delta = 0.5 * min(delta, pnorm)
        elif ratio >= 0.5 or abs(ratio - 1.0) <= 0.1:
            delta = max(delta, 2.0 * pnorm)

        if ratio >= 1e-4:
            x, f, fn = x_new, f_new, fn_new
            history.append(fn)
            jac = op.jacobian(x)
            diag = np.maximum(diag, np.linalg.norm(jac, axis=0))
        if delta <= 1e-14 * max(float(np.linalg.norm(diag * x)), 1.0):
            return RootResult(x, fn, it, False, history, "trust region collapsed")
    return RootResult(x, fn, it, True, history, "converged")


def _accept(x: np.ndarray, grid: Grid) -> str | None:
    scale = float(np.abs(x).max())
    if x.min() < -POS_TOL * scale:
        return "negative entries"
    if grid.dx * float(np.abs(x).sum()) < MIN_L1:
        return "trivial state"
    return None


def find_steady_state(
    op: Operator,
    tol: float | None = None,
    seeds: Sequence | None = None,
    max_iter: int = 200,
) -> SteadyState | None:
    """First positive, nontrivial root of ``op.apply`` reachable from ``seeds``.

    Seeds are tried in order. A seed whose iteration meets a singular Jacobian
    is restarted once with diagonal damping ``1e-8 * ||J||``. Returns ``None``
    when every seed fails.
    """
    grid = op.grid
    tol = default_tol(grid.n) if tol is None else tol
    seeds = default_seeds(grid) if seeds is None else seeds
    for k, seed in enumerate(seeds):
        result = None
        for damping in (0.0, 1e-8):
            try:
                result = dogleg_newton(op, seed, tol, max_iter=max_iter, damping=damping)
                break
            except SingularMatrixError as exc:
                logger.debug("seed %d: %s (damping=%g)", k, exc, damping)
        if result is None or not result.converged:
            continue
        reason = _accept(result.x, grid)
        if reason:
            logger.debug("seed %d converged to a rejected root: %s", k, reason)
            continue
        res = float(np.linalg.norm(op.apply(result.x)))
        return SteadyState(
            state=GridVector(grid, result.x),
            residual_norm=res,
            positive=True,
            seed_index=k,
            iterations=result.iterations,
            history=tuple(result.history),
        )
    return None


def integrate(
    op: Operator,
    u0,
    t_end: float,
    rtol: float = 1e-6,
    atol: float = 1e-9,
    samples: int = 101,
    implicit: bool = False,
    extra_times: Sequence[float] = (),
) -> Trajectory:
    """Integrate ``u' = op.apply(u)`` on ``[0, t_end]``.

    Uses the Dormand-Prince 5(4) pair by default; ``implicit=True`` switches to
    BDF with the analytic Jacobian. Output is sampled at ``samples`` uniform
    times (at least 50), merged with any ``extra_times`` inside the interval.
    """
    grid = op.grid
    y0 = np.array(coeffs_of(u0), dtype=float)
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if t_end == 0:
        times = np.zeros(1)
        states = y0[None, :]
    else:
        times = np.linspace(0.0, t_end, max(samples, 50))
        extra = [t for t in extra_times if 0.0 <= t <= t_end]
        if extra:
            times = np.unique(np.concatenate([times, extra]))
        kwargs = {"method": "BDF", "jac": lambda t, y: op.jacobian(y)} if implicit else {"method": "RK45"}
        # overflow surfaces as a failed step below, so the floating-point warnings add nothing
        with np.errstate(over="ignore", invalid="ignore"):
            sol = solve_ivp(lambda t, y: op.apply(y), (0.0, t_end), y0, t_eval=times, rtol=rtol, atol=atol, **kwargs)
        if sol.status != 0:
            hint = "" if implicit else "; retry with the implicit integrator"
            raise StiffnessError(f"integration failed at t = {sol.t[-1] if sol.t.size else 0.0:g}: {sol.message}{hint}")
        states = sol.y.T
    mom = np.array([moments(GridVector(grid, s)) for s in states])
    traj = Trajectory(grid, times, states, mom[:, 0], mom[:, 1])
    if y0.min() >= 0 and traj.min_value < -10 * atol:
        logger.warning("solution went negative (min %.3e) despite nonnegative initial data", traj.min_value)
    return traj

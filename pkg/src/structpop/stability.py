"""Local stability of steady states from the Jacobian spectrum.

The eigenvalue computation is the classifier. Gershgorin disks give a cheap
sufficient certificate, and the closed-form rate conditions are reported as
guidance only: when they hold, stability follows; when they fail, nothing
follows.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import linalg
from .grid import Grid, coeffs_of
from .linalg import GershgorinDisk, Spectrum
from .model import PBERates, SinkoRates

__all__ = [
    "StabilityReport",
    "classify",
    "sinko_condition",
    "pbe_condition",
    "gershgorin_prescreen",
    "STABLE",
    "UNSTABLE",
    "MARGINAL",
]

STABLE, UNSTABLE, MARGINAL = "Stable", "Unstable", "Marginal"
MARGIN_TOL = 1e-9


@dataclass
class StabilityReport:
    spectrum: Spectrum
    rightmost_re: float
    classification: str
    gershgorin: list[GershgorinDisk]
    conditions: dict = field(default_factory=dict)
    deflated: complex | None = None

    def to_json(self) -> dict:
        ev = self.spectrum.eigenvalues
        out = {
            "classification": self.classification,
            "rightmost_re": self.rightmost_re,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in ev],
            "gershgorin": [{"center": d.center, "radius": d.radius} for d in self.gershgorin],
            "gershgorin_certificate": all(d.center + d.radius < 0 for d in self.gershgorin),
            "conditions": self.conditions,
        }
        if self.deflated is not None:
            out["deflated_eigenvalue"] = [self.deflated.real, self.deflated.imag]
        return out


def _verdict(re: float, margin_tol: float) -> str:
    if re < -margin_tol:
        return STABLE
    if re > margin_tol:
        return UNSTABLE
    return MARGINAL


def classify(jac, margin_tol: float = MARGIN_TOL, deflate_null: bool = False) -> StabilityReport:
    """Classify by the real part of the rightmost eigenvalue of ``jac``.

    With ``deflate_null`` the eigenvalue of smallest modulus is set aside
    before classifying. Linear models have a whole ray of steady states; the
    eigenvalue along that ray is zero up to discretisation error and says
    nothing about attraction towards the ray.
    """
    m = linalg.as_square(jac)
    spec = linalg.eigen_spectrum(m)
    ev = spec.eigenvalues
    dropped = None
    if deflate_null and ev.size > 1:
        k = int(np.argmin(np.abs(ev)))
        dropped = complex(ev[k])
        ev = np.delete(ev, k)
    re = float(ev.real.max())
    return StabilityReport(
        spectrum=spec,
        rightmost_re=re,
        classification=_verdict(re, margin_tol),
        gershgorin=linalg.gershgorin_columns(m),
        deflated=dropped,
    )


def gershgorin_prescreen(jac) -> bool:
    """True when every column disk lies strictly in the left half plane."""
    return all(d.center + d.radius < 0 for d in linalg.gershgorin_columns(jac))


def sinko_condition(rates: SinkoRates, grid: Grid) -> tuple[bool, float]:
    """``q(x_i) - mu(x_i) < 0`` at every node; returns (holds, worst margin)."""
    x = grid.nodes
    m = np.asarray(rates.q(x), dtype=float) - np.asarray(rates.mu(x), dtype=float)
    worst = float(np.max(np.broadcast_to(m, x.shape)))
    return worst < 0, worst


@dataclass
class PBEConditions:
    cond1: bool
    cond2: bool
    cond1_margin: float
    ka_margin: float
    gamma_margin: float

    @property
    def cond2_ka(self) -> bool:
        return self.ka_margin <= 0

    @property
    def cond2_gamma(self) -> bool:
        return self.gamma_margin <= 0

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(cond2_ka=self.cond2_ka, cond2_gamma=self.cond2_gamma)
        return d


def pbe_condition(rates: PBERates, grid: Grid, u_star) -> PBEConditions:
    """Sufficient stability conditions for a PBE steady state on ``grid``.

    ``cond1``: ``q + k_f/2 - mu + int_0^{x_max - x} k_a(x, y) u*(y) dy < 0`` at
    every node, the integral taken as the right Riemann sum over
    ``j = 1 .. n - i``. ``cond2``: ``k_a(x_i, .) u*(.)`` and the daughter density
    ``gamma(. ; x_i)`` are nonincreasing across adjacent nodes. Margins are the
    worst (largest) values of the quantities that must be negative.
    """
    u = coeffs_of(u_star)
    x = grid.nodes
    n, dx = grid.n, grid.dx
    idx = np.arange(n)
    ka = np.broadcast_to(np.asarray(rates.k_a(x[:, None], x[None, :]), dtype=float), (n, n))
    admissible = (idx[:, None] + idx[None, :] + 2) <= n
    integral = (np.where(admissible, ka, 0.0) * dx) @ u
    q = np.broadcast_to(np.asarray(rates.q(x), dtype=float), (n,))
    kf = np.broadcast_to(np.asarray(rates.k_f(x), dtype=float), (n,))
    mu = np.broadcast_to(np.asarray(rates.mu(x), dtype=float), (n,))
    c1 = q + 0.5 * kf - mu + integral
    c1_margin = float(c1.max())

    ka_u = ka * u[None, :]
    ka_margin = float(np.diff(ka_u, axis=1).max()) if n > 1 else -np.inf
    # daughter density of parent x_i over daughters x_1..x_i
    gam = np.asarray(rates.gamma(x[None, :], x[:, None]), dtype=float)
    steps = np.diff(gam, axis=1)
    below = (idx[None, 1:] <= idx[:, None])
    gamma_margin = float(steps[below].max()) if below.any() else -np.inf
    return PBEConditions(
        cond1=c1_margin < 0,
        cond2=ka_margin <= 0 and gamma_margin <= 0,
        cond1_margin=c1_margin,
        ka_margin=ka_margin,
        gamma_margin=gamma_margin,
    )

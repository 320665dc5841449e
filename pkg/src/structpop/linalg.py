"""Dense linear algebra: nullspaces, spectra, Gershgorin disks, LU solves.

Matrices are plain 2-D numpy float arrays. The heavy lifting is LAPACK
(through numpy/scipy); this module fixes tolerances and error reporting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NumericalError, SingularMatrixError

__all__ = [
    "Spectrum",
    "GershgorinDisk",
    "as_square",
    "nullspace",
    "eigen_spectrum",
    "gershgorin_columns",
    "solve_linear",
]


@dataclass(frozen=True)
class Spectrum:
    """All eigenvalues of a real square matrix.

    ``vectors`` holds right eigenvectors column-wise when they were requested.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray | None = None

    @property
    def rightmost(self) -> complex:
        return complex(self.eigenvalues[_rightmost_index(self.eigenvalues)])

    @property
    def rightmost_re(self) -> float:
        return float(np.max(self.eigenvalues.real))


class GershgorinDisk(NamedTuple):
    center: float
    radius: float


def _rightmost_index(ev: np.ndarray) -> int:
    re = ev.real
    cand = np.flatnonzero(re == re.max())
    # for a conjugate pair report the member with nonnegative imaginary part
    return int(cand[np.argmax(ev.imag[cand])])


def as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix has non-finite entries")
    return a


def nullspace(m, rank_tol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal basis of the numerical nullspace of ``m``.

    A right singular vector belongs to the nullspace when its singular value is
    at most ``rank_tol * sigma_max``. Returns an empty list for full rank.
    """
    a = as_square(m)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    try:
        _, s, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return [row.copy() for row in np.eye(a.shape[0])]
    null = np.flatnonzero(s <= rank_tol * smax)
    return [vt[i].copy() for i in null]


def singular_values(m) -> np.ndarray:
    try:
        return np.linalg.svd(as_square(m), compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc


def eigen_spectrum(m, vectors: bool = False) -> Spectrum:
    """Every eigenvalue of ``m`` (Hessenberg reduction + shifted QR, LAPACK geev)."""
    a = as_square(m)
    try:
        if vectors:
            ev, vec = np.linalg.eig(a)
        else:
            ev, vec = np.linalg.eigvals(a), None
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"QR iteration did not converge: {exc}") from exc
    return Spectrum(np.asarray(ev, dtype=complex), vec)


def gershgorin_columns(m) -> list[GershgorinDisk]:
    """Column Gershgorin disks: center ``m[i, i]``, radius ``sum_{j != i} |m[j, i]|``."""
    a = as_square(m)
    d = np.diag(a)
    r = np.abs(a).sum(axis=0) - np.abs(d)
    return [GershgorinDisk(float(c), float(max(ri, 0.0))) for c, ri in zip(d, r)]


def in_disk_union(z, disks: list[GershgorinDisk], slack: float = 0.0) -> np.ndarray:
    """Boolean mask: which points ``z`` lie in the union of ``disks``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    c = np.array([d.center for d in disks])
    r = np.array([d.radius for d in disks])
    return (np.abs(z[:, None] - c[None, :]) <= r[None, :] + slack).any(axis=1)


def solve_linear(m, rhs, pivot_tol: float = 1e-14) -> np.ndarray:
    """Solve ``m x = rhs`` by partially pivoted LU.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``pivot_tol * ||m||_inf``.
    """
    a = as_square(m)
    b = np.asarray(rhs, dtype=float)
    with warnings.catch_warnings():
        # exact zero pivots are reported through SingularMatrixError below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    scale = np.abs(a).sum(axis=1).max() if a.size else 0.0
    d = np.abs(np.diag(lu))
    bad = np.flatnonzero(d <= pivot_tol * scale)
    if scale == 0.0 or bad.size:
        p = int(bad[0]) if bad.size else 0
        raise SingularMatrixError(p, float(d[p]) if d.size else 0.0)
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)

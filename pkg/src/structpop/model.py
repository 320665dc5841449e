"""Model rate functions and kernels, and their construction from configuration.

All rate callables are vectorised: they accept numpy arrays and broadcast.
They are small picklable classes rather than lambdas so that rate objects can
be shipped to worker processes during parameter sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np
from scipy.integrate import simpson

from .errors import ConfigError, InvalidRateError

__all__ = [
    "ParamPoint",
    "SinkoRates",
    "PBERates",
    "Affine",
    "ShearKernel",
    "BetaDaughter",
    "TableRate",
    "TableKernel",
    "TableDaughter",
    "sinko_canonical",
    "pbe_canonical",
    "rates_from_config",
    "gamma_normalization",
]

# ---------------------------------------------------------------- rate pieces


@dataclass(frozen=True)
class Affine:
    """``x -> slope * x + intercept``."""

    slope: float
    intercept: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class ConstantKernel:
    value: float = 0.0

    def __call__(self, x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(self.value))


@dataclass(frozen=True)
class ShearKernel:
    """Orthokinetic (laminar shear) aggregation kernel ``(x^(1/3) + y^(1/3))^3``."""

    def __call__(self, x, y):
        return (np.cbrt(np.asarray(x, dtype=float)) + np.cbrt(np.asarray(y, dtype=float))) ** 3


@dataclass(frozen=True)
class BetaDaughter:
    """Beta(2, 2) daughter density ``6 x (y - x) / y^3`` on ``0 <= x <= y``."""

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = 6.0 * x * (y - x) / y**3
        return np.where((x >= 0) & (x <= y) & (y > 0), v, 0.0)


@dataclass(frozen=True)
class TableRate:
    """Piecewise-linear interpolant of sampled values (held constant outside)."""

    x: tuple
    value: tuple

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.x, self.value)


@dataclass(frozen=True)
class TableKernel:
    """Bilinear interpolant of a kernel sampled on ``x`` by ``y``."""

    x: tuple
    y: tuple
    value: tuple

    def __call__(self, x, y):
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(
            (np.asarray(self.x), np.asarray(self.y)), np.asarray(self.value), bounds_error=False, fill_value=None
        )
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        xc = np.clip(x, self.x[0], self.x[-1])
        yc = np.clip(y, self.y[0], self.y[-1])
        return interp(np.stack([xc.ravel(), yc.ravel()], axis=-1)).reshape(x.shape)


@dataclass(frozen=True)
class TableDaughter:
    """Tabulated daughter density ``Gamma(x; y)``, zero for ``x > y``.

    ``value[i][j]`` is the density of daughter ``x[i]`` from parent ``y[j] > 0``.
    Each parent column is read in the self-similar variable ``s = x / y`` as a
    density ``phi_j(s) = y_j Gamma(s y_j; y_j)`` on ``[0, 1]``; between parents
    ``phi`` is interpolated linearly in ``y`` (held constant beyond the ends)
    and ``Gamma(x; y) = phi(x / y; y) / y``. A convex combination of unit-mass
    densities has unit mass, so normalisation holds for every parent size.
    """

    x: tuple
    y: tuple
    value: tuple

    def __post_init__(self):
        if min(self.y) <= 0:
            raise ValueError("parent sizes of a daughter table must be positive")

    def _phi(self, j: int, s: np.ndarray) -> np.ndarray:
        yj = self.y[j]
        col = np.maximum(np.asarray(self.value, dtype=float)[:, j], 0.0)
        return yj * np.interp(s * yj, self.x, col)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        ys = np.asarray(self.y)
        inside = (x >= 0) & (x <= y) & (y > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(inside, x / y, 0.0)
        yc = np.clip(y, ys[0], ys[-1])
        hi = np.clip(np.searchsorted(ys, yc, side="right"), 1, len(ys) - 1) if len(ys) > 1 else np.zeros(y.shape, int)
        lo = np.maximum(hi - 1, 0)
        span = ys[hi] - ys[lo]
        w = np.where(span > 0, (yc - ys[lo]) / np.where(span > 0, span, 1.0), 0.0)
        phi = np.zeros(x.shape)
        for j in range(len(ys)):
            weight = np.where(lo == j, 1.0 - w, 0.0) + np.where(hi == j, w, 0.0) if len(ys) > 1 else np.ones(x.shape)
            if np.any(weight[inside] > 0):
                phi += weight * self._phi(j, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(inside, phi / y, 0.0)


# ---------------------------------------------------------------- rate bundles


@dataclass(frozen=True)
class ParamPoint:
    a: float
    b: float
    c: float

    def __post_init__(self):
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"parameter {name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class SinkoRates:
    """Renewal ``q``, growth ``g`` and removal ``mu`` rates."""

    q: Callable
    g: Callable
    mu: Callable

    def validate(self, x_max: float, samples: int = 257) -> None:
        x = np.linspace(0.0, x_max, samples)
        for name in ("q", "g", "mu"):
            v = np.asarray(getattr(self, name)(x), dtype=float)
            if not np.isfinite(v).all():
                raise InvalidRateError(f"{name} is not finite on [0, {x_max}]")
            if name == "g" and (v <= 0).any():
                raise InvalidRateError("growth rate g must be strictly positive")
            if name != "g" and (v < 0).any():
                raise InvalidRateError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class PBERates(SinkoRates):
    """Sinko-Streifer rates plus aggregation ``k_a``, fragmentation ``k_f`` and
    daughter density ``gamma(x; y)`` (daughter ``x`` from parent ``y``)."""

    k_a: Callable = ConstantKernel(0.0)
    k_f: Callable = Affine(0.0, 0.0)
    gamma: Callable = BetaDaughter()

    def validate(self, x_max: float, samples: int = 257) -> None:
        super().validate(x_max, samples)
        x = np.linspace(0.0, x_max, 33)
        ka = np.asarray(self.k_a(x[:, None], x[None, :]), dtype=float)
        if not np.isfinite(ka).all() or (ka < 0).any():
            raise InvalidRateError("aggregation kernel must be finite and nonnegative")
        if not np.allclose(ka, ka.T, rtol=1e-12, atol=0.0):
            raise InvalidRateError("aggregation kernel must be symmetric")
        kf = np.asarray(self.k_f(x), dtype=float)
        if not np.isfinite(kf).all() or (kf < 0).any():
            raise InvalidRateError("fragmentation rate must be finite and nonnegative")
        ys = np.linspace(0.0, x_max, 9)[1:]
        dev = np.abs(gamma_normalization(self.gamma, ys) - 1.0)
        if dev.max() > 1e-6:
            y = ys[int(np.argmax(dev))]
            raise InvalidRateError(f"daughter density does not integrate to 1 for parent size {y:g}")


def gamma_normalization(gamma: Callable, ys, points: int = 2001) -> np.ndarray:
    """``int_0^y gamma(x; y) dx`` for each parent size in ``ys`` (composite Simpson)."""
    out = []
    for y in np.atleast_1d(ys):
        x = np.linspace(0.0, y, points)
        out.append(simpson(np.asarray(gamma(x, y), dtype=float), x=x))
    return np.asarray(out)


# ---------------------------------------------------------------- constructors


def sinko_canonical(p: ParamPoint) -> SinkoRates:
    """``q = a(x+1)``, ``g = b(x+1)``, ``mu = c``."""
    if p.b <= 0:
        raise InvalidRateError("growth parameter b must be positive")
    return SinkoRates(q=Affine(p.a, p.a), g=Affine(p.b, p.b), mu=Affine(0.0, p.c))


def pbe_canonical(p: ParamPoint) -> PBERates:
    """``q = a(x+1)``, ``g = b(x+1)``, ``mu = c x``, ``k_f = x``, shear ``k_a``, Beta(2,2) ``gamma``."""
    if p.b <= 0:
        raise InvalidRateError("growth parameter b must be positive")
    return PBERates(
        q=Affine(p.a, p.a),
        g=Affine(p.b, p.b),
        mu=Affine(p.c, 0.0),
        k_a=ShearKernel(),
        k_f=Affine(1.0, 0.0),
        gamma=BetaDaughter(),
    )


def _number(cfg: Mapping, key: str, path: str, default=None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"{path}{key}", "missing required parameter")
        return default
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}{key}", f"expected a finite number, got {v!r}")
    return float(v)


def _vector(spec: Any, key: str, path: str) -> tuple:
    if not isinstance(spec, Mapping) or key not in spec:
        raise ConfigError(f"{path}.{key}", "missing table array")
    try:
        arr = np.asarray(spec[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}", "table entries must be numbers") from None
    if arr.ndim != 1 or arr.size < 2 or not np.isfinite(arr).all():
        raise ConfigError(f"{path}.{key}", "expected a finite array of length >= 2")
    return tuple(arr.tolist())


def _table_rate(tables: Mapping, name: str) -> TableRate:
    path = f"tables.{name}"
    if name not in tables:
        raise ConfigError(path, "missing table")
    spec = tables[name]
    x = _vector(spec, "x", path)
    v = _vector(spec, "value", path)
    if len(x) != len(v):
        raise ConfigError(f"{path}.value", f"length {len(v)} does not match x length {len(x)}")
    if np.any(np.diff(x) <= 0):
        raise ConfigError(f"{path}.x", "sample points must be strictly increasing")
    return TableRate(x, v)


def _table_2d(tables: Mapping, name: str) -> tuple[tuple, tuple, np.ndarray]:
    path = f"tables.{name}"
    if name not in tables:
        raise ConfigError(path, "missing table")
    spec = tables[name]
    x = _vector(spec, "x", path)
    y = _vector(spec, "y", path)
    try:
        v = np.asarray(spec.get("value"), dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.value", "table entries must be numbers") from None
    if v.shape != (len(x), len(y)) or not np.isfinite(v).all():
        raise ConfigError(f"{path}.value", f"expected a finite {len(x)}x{len(y)} array")
    for key, arr in (("x", x), ("y", y)):
        if np.any(np.diff(arr) <= 0):
            raise ConfigError(f"{path}.{key}", "sample points must be strictly increasing")
    return x, y, v


def _normalized_daughter(x: tuple, y: tuple, v: np.ndarray, band: float = 0.05) -> TableDaughter:
    cols = [j for j, yj in enumerate(y) if yj > 0]
    if not cols:
        raise ConfigError("tables.gamma.y", "needs at least one positive parent size")
    v = np.maximum(v[:, cols], 0.0)
    ys = tuple(y[j] for j in cols)
    raw = TableDaughter(x, ys, tuple(map(tuple, v)))
    integrals = gamma_normalization(raw, ys)
    for k, (j, s) in enumerate(zip(cols, integrals)):
        if abs(s - 1.0) > band:
            raise ConfigError(
                f"tables.gamma.value[*][{j}]",
                f"daughter density integrates to {s:.4g} for parent {y[j]:g}; must be within {band:.0%} of 1",
            )
        v[:, k] /= s
    return TableDaughter(x, ys, tuple(map(tuple, v)))


def rates_from_config(cfg: Mapping) -> SinkoRates | PBERates:
    """Build model rates from a configuration document.

    Recognised families are ``canonical-sinko``, ``canonical-pbe`` and
    ``table``. The table family reads ``tables.{q,g,mu}`` as ``{x, value}``
    samples and, for ``model: pbe``, also ``tables.k_f`` (1-D) and
    ``tables.k_a`` / ``tables.gamma`` (``{x, y, value}`` grids). Tabulated
    daughter densities are renormalised per parent slice when their integral
    is within 5% of one, and rejected otherwise.
    """
    if not isinstance(cfg, Mapping):
        raise ConfigError("<root>", "configuration must be a mapping")
    family = cfg.get("family")
    x_max = _number(cfg, "x_max", "", 1.0)
    if x_max <= 0:
        raise ConfigError("x_max", "must be positive")
    if family in ("canonical-sinko", "canonical-pbe"):
        try:
            p = ParamPoint(_number(cfg, "a", ""), _number(cfg, "b", ""), _number(cfg, "c", ""))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("a|b|c", str(exc)) from None
        try:
            rates = sinko_canonical(p) if family == "canonical-sinko" else pbe_canonical(p)
        except InvalidRateError as exc:
            raise ConfigError("b", str(exc)) from None
    elif family == "table":
        model = cfg.get("model")
        if model not in ("sinko", "pbe"):
            raise ConfigError("model", f"expected 'sinko' or 'pbe', got {model!r}")
        tables = cfg.get("tables")
        if not isinstance(tables, Mapping):
            raise ConfigError("tables", "table family needs a 'tables' mapping")
        q, g, mu = (_table_rate(tables, k) for k in ("q", "g", "mu"))
        if model == "sinko":
            rates = SinkoRates(q, g, mu)
        else:
            kx, ky, kv = _table_2d(tables, "k_a")
            if not np.allclose(kv, kv.T) or kx != ky:
                raise ConfigError("tables.k_a.value", "aggregation kernel table must be symmetric on a square grid")
            gx, gy, gv = _table_2d(tables, "gamma")
            rates = PBERates(
                q, g, mu,
                k_a=TableKernel(kx, ky, tuple(map(tuple, kv))),
                k_f=_table_rate(tables, "k_f"),
                gamma=_normalized_daughter(gx, gy, gv),
            )
    else:
        raise ConfigError("family", f"unknown rate family {family!r}")
    try:
        rates.validate(x_max)
    except InvalidRateError as exc:
        raise ConfigError("tables" if family == "table" else "family", str(exc)) from None
    return rates


def model_kind(cfg: Mapping) -> str:
    """``'sinko'`` or ``'pbe'`` for a configuration document."""
    family = cfg.get("family")
    if family == "canonical-sinko":
        return "sinko"
    if family == "canonical-pbe":
        return "pbe"
    model = cfg.get("model")
    if model not in ("sinko", "pbe"):
        raise ConfigError("model", f"expected 'sinko' or 'pbe', got {model!r}")
    return model

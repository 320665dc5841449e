"""Existence and stability maps over boxes of the ``(a, b, c)`` rate parameters.

Every grid point is evaluated in isolation (fresh rates, fresh operator), so a
sweep parallelises trivially over worker processes. Records are always
emitted in the same point order: ``b`` outermost, then ``c``, with ``a``
varying fastest, independent of the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import pbe, sinko, stability
from .errors import StructPopError
from .grid import Grid, GridVector
from .model import ParamPoint, pbe_canonical, sinko_canonical
from .solve import default_seeds, default_tol, find_steady_state

logger = logging.getLogger(__name__)

__all__ = [
    "SweepSpec",
    "SweepRecord",
    "param_values",
    "points",
    "evaluate_point",
    "warm_start_policy",
    "run",
    "write_csv",
    "CSV_COLUMNS",
]

STABLE, UNSTABLE, NOT_FOUND = "Stable", "Unstable", "NotFound"
CSV_COLUMNS = ["a", "b", "c", "status", "rightmost_re", "residual", "seed_index", "wall_ms"]

SINKO_BOX = {"a": (0.0, 1.0, 0.05), "b": (0.0, 1.0, 0.05), "c": (0.0, 1.0, 0.05)}
PBE_BOX = {"a": (0.0, 15.0, 0.5), "b": (0.0, 1.0, 0.5), "c": (0.0, 5.0, 0.5)}


@dataclass(frozen=True)
class SweepSpec:
    model: str
    ranges: dict
    grid_n: int = 100
    x_max: float = 1.0
    tol: float | None = None
    existence_tol: float = sinko.EXISTENCE_TOL
    margin_tol: float = stability.MARGIN_TOL
    warm_start: bool = False

    def __post_init__(self):
        if self.model not in ("sinko", "pbe"):
            raise ValueError(f"model must be 'sinko' or 'pbe', got {self.model!r}")
        for name in ("a", "b", "c"):
            if name not in self.ranges:
                raise ValueError(f"missing range for parameter {name}")
            lo, hi, step = self.ranges[name]
            if not (lo <= hi) or not step > 0:
                raise ValueError(f"range for {name} needs lo <= hi and step > 0, got {(lo, hi, step)}")

    @classmethod
    def desk(cls, model: str, **kw) -> "SweepSpec":
        box = SINKO_BOX if model == "sinko" else PBE_BOX
        return cls(model=model, ranges=dict(box), **kw)

    def with_step(self, step: float) -> "SweepSpec":
        return replace(self, ranges={k: (lo, hi, step) for k, (lo, hi, _) in self.ranges.items()})

    @property
    def solver_tol(self) -> float:
        return default_tol(self.grid_n) if self.tol is None else self.tol

    def count(self) -> int:
        return math.prod(len(param_values(*self.ranges[k])) for k in ("a", "b", "c"))

    def to_json(self) -> dict:
        d = asdict(self)
        d["ranges"] = {k: list(v) for k, v in self.ranges.items()}
        d["points"] = self.count()
        return d


@dataclass
class SweepRecord:
    point: ParamPoint
    status: str
    rightmost_re: float | None = None
    residual_norm: float | None = None
    seed_index: int | None = None
    wall_time: float = 0.0
    dx: float = 0.0
    note: str = ""
    state: np.ndarray | None = field(default=None, repr=False)


def param_values(lo: float, hi: float, step: float) -> list[float]:
    """``lo, lo + step, ...`` up to ``hi``; ``floor((hi - lo)/step) + 1`` values."""
    k = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 12) for i in range(k + 1)]


def points(spec: SweepSpec) -> list[ParamPoint]:
    av, bv, cv = (param_values(*spec.ranges[k]) for k in ("a", "b", "c"))
    return [ParamPoint(a, b, c) for b in bv for c in cv for a in av]


def warm_start_policy(prev: SweepRecord | None, next_point: ParamPoint, grid: Grid) -> list[GridVector]:
    """Seeds for ``next_point``: the previous converged state (if any) followed
    by the standard constant ladder."""
    seeds = default_seeds(grid)
    if prev is not None and prev.status != NOT_FOUND and prev.state is not None:
        seeds.insert(0, GridVector(grid, prev.state))
    return seeds


def evaluate_point(spec: SweepSpec, point: ParamPoint, seeds: Sequence | None = None) -> SweepRecord:
    """Existence and stability at one parameter point; never raises."""
    grid = Grid(spec.grid_n, spec.x_max)
    t0 = time.perf_counter()
    rec = SweepRecord(point, NOT_FOUND, dx=grid.dx)
    try:
        with threadpool_limits(1):
            if spec.model == "sinko":
                op = sinko.assemble(grid, sinko_canonical(point))
                ss = sinko.steady_state(op, existence_tol=spec.existence_tol)
                report = None if ss is None else stability.classify(op.matrix, spec.margin_tol, deflate_null=True)
            else:
                op = pbe.assemble(grid, pbe_canonical(point))
                ss = find_steady_state(op, tol=spec.solver_tol, seeds=seeds)
                report = None if ss is None else stability.classify(pbe.jacobian(op, ss.state), spec.margin_tol)
        if ss is not None:
            # a marginal verdict is not asymptotic stability
            rec.status = STABLE if report.classification == stability.STABLE else UNSTABLE
            rec.rightmost_re = report.rightmost_re
            rec.residual_norm = ss.residual_norm
            rec.seed_index = ss.seed_index
            rec.state = np.array(ss.state.coeffs)
    except (StructPopError, ValueError, np.linalg.LinAlgError) as exc:
        rec.note = f"{type(exc).__name__}: {exc}"
        logger.debug("point %s: %s", point, rec.note)
    rec.wall_time = time.perf_counter() - t0
    return rec


def _evaluate_line(spec: SweepSpec, line: list[ParamPoint]) -> list[SweepRecord]:
    grid = Grid(spec.grid_n, spec.x_max)
    out: list[SweepRecord] = []
    prev = None
    for p in line:
        seeds = warm_start_policy(prev, p, grid) if spec.model == "pbe" else None
        rec = evaluate_point(spec, p, seeds)
        out.append(rec)
        prev = rec
    return out


def _evaluate_one(spec: SweepSpec, point: ParamPoint) -> SweepRecord:
    return evaluate_point(spec, point)


def _strip(rec: SweepRecord, keep_state: bool) -> SweepRecord:
    if not keep_state:
        rec.state = None
    return rec


def run(spec: SweepSpec, workers: int = 1, keep_state: bool = False) -> Iterator[SweepRecord]:
    """Evaluate every point of ``spec``; yields records in point order.

    With ``spec.warm_start`` each line of constant ``(b, c)`` is processed in
    order of increasing ``a``, seeding each point from its predecessor.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    pts = points(spec)
    if spec.warm_start:
        na = len(param_values(*spec.ranges["a"]))
        tasks = [pts[i : i + na] for i in range(0, len(pts), na)]
        fn, unit = _evaluate_line, True
    else:
        tasks, fn, unit = pts, _evaluate_one, False

    if workers == 1:
        results: Iterable = (fn(spec, t) for t in tasks)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        chunk = max(1, len(tasks) // (8 * workers))
        results = pool.map(fn, [spec] * len(tasks), tasks, chunksize=chunk)
    try:
        for r in results:
            if unit:
                for rec in r:
                    yield _strip(rec, keep_state)
            else:
                yield _strip(r, keep_state)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def csv_row(rec: SweepRecord, timing: bool = False, scaled: bool = False) -> list[str]:
    p = rec.point
    row = [
        f"{p.a:.10g}",
        f"{p.b:.10g}",
        f"{p.c:.10g}",
        rec.status,
        _fmt(rec.rightmost_re),
        _fmt(rec.residual_norm),
        _fmt(rec.seed_index),
        f"{rec.wall_time * 1e3:.3f}" if timing else "",
    ]
    if scaled:
        row.append(_fmt(None if rec.rightmost_re is None else rec.rightmost_re * rec.dx))
    return row


def write_csv(records: Iterable[SweepRecord], stream: io.TextIOBase, timing: bool = False, scaled: bool = False) -> int:
    """Write the sweep table; returns the number of data rows.

    ``wall_ms`` is left empty unless ``timing`` is set, which keeps the file
    reproducible byte for byte.
    """
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS + (["rightmost_re_dx"] if scaled else []))
    k = 0
    for rec in records:
        w.writerow(csv_row(rec, timing, scaled))
        k += 1
    return k


def read_csv(stream) -> list[dict]:
    return list(csv.DictReader(stream))


def write_sidecar(spec: SweepSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")

"""Command-line interface: ``structpop {steady,sweep,simulate,convergence,spectrum}``.

Each command reads one JSON configuration file (see :func:`model.rates_from_config`)
and writes its results into ``--out``. Scalar flags override the matching
configuration keys, which override built-in defaults. Every output directory
receives CSV tables, a ``manifest.json`` and, unless ``--no-plot`` is given,
PNG figures.

Exit codes: 0 success, 1 usage, configuration or I/O error, 2 numerical
advisory (for example an explicit integrator giving up on a stiff problem),
3 no steady state found.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, pbe, sinko, stability, sweep
from .errors import ConfigError, NoSteadyStateError, NumericalError, StiffnessError, StructPopError
from .grid import Grid, moments, sup_error
from .model import model_kind, rates_from_config
from .solve import default_tol, find_steady_state, integrate

logger = logging.getLogger("structpop")

EXIT_OK, EXIT_ERROR, EXIT_ADVISORY, EXIT_NOT_FOUND = 0, 1, 2, 3
WORKERS_ENV = "STRUCTPOP_WORKERS"
DEFAULT_N = 100
DEFAULT_N_LIST = {"convergence": "25,50,100,200", "spectrum": "5,10,20,50,100,200"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return repr(v) if math.isfinite(v) else str(v)


# configuration


class Run:
    """Resolved configuration, output directory and bookkeeping for one command."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.config_path = Path(args.config)
        try:
            raw = self.config_path.read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        try:
            cfg = json.loads(raw)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError("<root>", f"not valid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        self.digests = {str(self.config_path): hashlib.sha256(raw).hexdigest()}
        for key, flag in (("n", "n"), ("x_max", "x_max"), ("tol", "tol")):
            value = getattr(args, flag, None)
            if value is not None:
                cfg[key] = value
        self.config = cfg
        self.model = model_kind(cfg)
        self.x_max = float(cfg.get("x_max", 1.0))
        self.n = self._int("n", DEFAULT_N)
        tol = cfg.get("tol")
        if tol is not None and not (isinstance(tol, (int, float)) and tol > 0):
            raise ConfigError("tol", "must be a positive number")
        self.tol = tol
        self.out = Path(args.out)
        self.outputs: list[str] = []
        self.results: dict = {}
        self.plot = not args.no_plot
        self.prepared = False

    def _int(self, key: str, default: int) -> int:
        v = self.config.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(key, f"expected a positive integer, got {v!r}")
        return v

    def rates(self):
        return rates_from_config(self.config)

    def grid(self, n: int | None = None) -> Grid:
        return Grid(self.n if n is None else n, self.x_max)

    def solver_tol(self, n: int) -> float:
        return default_tol(n) if self.tol is None else float(self.tol)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def prepare(self) -> None:
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {self.out}: {exc.strerror}") from None
        self.prepared = True

    def write_manifest(self, exit_code: int) -> None:
        flags = {k: v for k, v in vars(self.args).items() if k not in ("func", "config")}
        manifest = {
            "command": self.command,
            "version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "config": self.config,
            "flags": flags,
            "inputs": self.digests,
            "outputs": sorted(set(self.outputs)),
            "exit_code": exit_code,
            "results": self.results,
        }
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _n_list(run: Run, text: str | None) -> list[int]:
    raw = text if text is not None else run.config.get("n_list", DEFAULT_N_LIST[run.command])
    try:
        ns = [int(s) for s in raw.split(",")] if isinstance(raw, str) else [int(s) for s in raw]
    except (TypeError, ValueError):
        raise UsageError(f"--n-list must be comma-separated integers, got {raw!r}") from None
    if any(n < 1 for n in ns):
        raise UsageError("--n-list entries must be positive")
    return sorted(set(ns))


def _steady(run: Run, grid: Grid, rates):
    """``(state, report, operator)`` on ``grid``; state and report are ``None`` when nothing is found."""
    if run.model == "sinko":
        op = sinko.assemble(grid, rates)
        ss = sinko.steady_state(op, existence_tol=float(run.config.get("existence_tol", sinko.EXISTENCE_TOL)))
        if ss is None:
            return None, None, op
        report = stability.classify(op.matrix, deflate_null=True)
        holds, worst = stability.sinko_condition(rates, grid)
        report.conditions = {"q_below_mu": holds, "q_minus_mu_max": worst}
        return ss, report, op
    op = pbe.assemble(grid, rates)
    ss = find_steady_state(op, tol=run.solver_tol(grid.n))
    if ss is None:
        return None, None, op
    report = stability.classify(pbe.jacobian(op, ss.state))
    report.conditions = stability.pbe_condition(rates, grid, ss.state).to_json()
    return ss, report, op


def _exact(run: Run, rates):
    """Exact Sinko steady state when the renewal balance holds, else ``None``."""
    if run.model != "sinko":
        return None
    if abs(sinko.necessary_condition(rates, run.x_max) - 1.0) > 1e-6:
        return None
    return lambda x: sinko.exact_steady_state(rates, x, run.x_max)


# commands


def cmd_steady(run: Run) -> int:
    rates = run.rates()
    grid = run.grid()
    run.prepare()
    ss, report, op = _steady(run, grid, rates)
    if ss is None:
        if run.model == "sinko":
            r = sinko.renewal_number(op)
            run.results = {"status": "NotFound", "renewal_number": r}
            print(f"no steady state: discrete renewal number {r:.6g} differs from 1", file=sys.stderr)
        else:
            run.results = {"status": "NotFound"}
            print("no positive steady state reached from any seed", file=sys.stderr)
        return EXIT_NOT_FOUND
    u = ss.state.coeffs
    _write_rows(run.path("steady_state.csv"), ["x", "u"], ((_fmt(x), _fmt(v)) for x, v in zip(grid.nodes, u)))
    _write_json(run.path("stability.json"), report.to_json())
    m0, m1 = moments(ss.state)
    run.results = {
        "status": "Found",
        "classification": report.classification,
        "rightmost_re": report.rightmost_re,
        "residual_norm": ss.residual_norm,
        "seed_index": ss.seed_index,
        "m0": m0,
        "m1": m1,
    }
    exact = _exact(run, rates)
    if exact is not None:
        run.results["sup_error_vs_exact"] = sup_error(ss.state, exact)
    if run.plot:
        from . import plotting

        plotting.steady_state(grid.nodes, u, run.path("steady_state.png"), exact=exact, title=f"n = {grid.n}")
    print(f"steady state found: {report.classification}, rightmost Re = {report.rightmost_re:.6g}")
    return EXIT_OK


def _sweep_ranges(run: Run, steps: float | None) -> dict:
    box = dict(sweep.SINKO_BOX if run.model == "sinko" else sweep.PBE_BOX)
    given = run.config.get("sweep", {})
    if not isinstance(given, dict):
        raise ConfigError("sweep", "expected a mapping of parameter ranges")
    for name, value in given.items():
        if name not in box:
            raise ConfigError(f"sweep.{name}", "unknown parameter; expected a, b or c")
        if not (isinstance(value, list) and len(value) == 3 and all(isinstance(v, (int, float)) for v in value)):
            raise ConfigError(f"sweep.{name}", "expected [lo, hi, step]")
        box[name] = tuple(float(v) for v in value)
    if steps is not None:
        box = {k: (lo, hi, steps) for k, (lo, hi, _) in box.items()}
    return box


def _workers(flag: int | None) -> int:
    if flag is not None:
        value = flag
    else:
        env = os.environ.get(WORKERS_ENV)
        if not env:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if value < 1:
        raise UsageError("worker count must be at least 1")
    return value


def cmd_sweep(run: Run) -> int:
    if run.config.get("family") not in ("canonical-sinko", "canonical-pbe"):
        raise ConfigError("family", "a parameter sweep needs a canonical rate family")
    workers = _workers(run.args.workers)
    try:
        spec = sweep.SweepSpec(
            model=run.model,
            ranges=_sweep_ranges(run, run.args.steps),
            grid_n=run.n,
            x_max=run.x_max,
            tol=run.tol,
            existence_tol=float(run.config.get("existence_tol", sinko.EXISTENCE_TOL)),
            warm_start=run.args.warm_start,
        )
    except ValueError as exc:
        raise ConfigError("sweep", str(exc)) from None
    run.prepare()
    sweep.write_sidecar(spec, run.path("sweep_spec.json"))
    counts = {sweep.STABLE: 0, sweep.UNSTABLE: 0, sweep.NOT_FOUND: 0}
    records = []
    with open(run.path("sweep.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sweep.CSV_COLUMNS + (["rightmost_re_dx"] if run.args.scaled else []))
        for rec in sweep.run(spec, workers=workers):
            w.writerow(sweep.csv_row(rec, timing=run.args.timing, scaled=run.args.scaled))
            fh.flush()
            counts[rec.status] += 1
            records.append(rec)
    run.results = {"points": len(records), "counts": counts, "workers": workers}
    if run.plot and records:
        from . import plotting

        plotting.sweep_regions(records, run.path("regions.png"))
    print(", ".join(f"{k} {v}" for k, v in counts.items()))
    return EXIT_OK


def _initial_condition(run: Run, spec: str, grid: Grid, op, rates) -> np.ndarray:
    kind, _, arg = spec.partition(":")
    if kind == "const":
        try:
            return np.full(grid.n, float(arg))
        except ValueError:
            raise UsageError(f"--ic const:<value> needs a number, got {arg!r}") from None
    if kind == "steady":
        factor = float(arg) if arg else 1.0
        ss, _, _ = _steady(run, grid, rates)
        if ss is None:
            raise NoSteadyStateError(float("nan"))
        return factor * np.array(ss.state.coeffs)
    path = Path(arg if kind == "file" else spec)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        u = np.array([float(r["u"]) for r in rows])
    except OSError as exc:
        raise UsageError(f"cannot read initial condition {path}: {exc.strerror}") from None
    except (KeyError, TypeError, ValueError):
        raise UsageError(f"initial condition {path} must be a CSV with a numeric 'u' column") from None
    if u.size != grid.n:
        raise UsageError(f"initial condition has {u.size} values, grid has n = {grid.n}")
    run.digests[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()
    return u


def _parse_times(text: str | None, t_end: float) -> list[float]:
    if text is None:
        return [0.0, t_end]
    try:
        times = sorted({float(s) for s in text.split(",") if s.strip()})
    except ValueError:
        raise UsageError(f"--snapshots must be comma-separated numbers, got {text!r}") from None
    bad = [t for t in times if not 0.0 <= t <= t_end]
    if bad:
        raise UsageError(f"snapshot times {bad} lie outside [0, {t_end:g}]")
    return times


def cmd_simulate(run: Run) -> int:
    t_end = run.args.t_end if run.args.t_end is not None else float(run.config.get("t_end", 10.0))
    if t_end < 0:
        raise UsageError("--t-end must be nonnegative")
    rates = run.rates()
    grid = run.grid()
    op = sinko.assemble(grid, rates) if run.model == "sinko" else pbe.assemble(grid, rates)
    u0 = _initial_condition(run, run.args.ic, grid, op, rates)
    snaps = _parse_times(run.args.snapshots, t_end)
    run.prepare()
    try:
        traj = integrate(op, u0, t_end, rtol=run.args.rtol, atol=run.args.atol, implicit=run.args.implicit, extra_times=snaps)
    except StiffnessError as exc:
        run.results = {"status": "aborted", "message": str(exc)}
        print(f"{exc}\nhint: rerun with --implicit", file=sys.stderr)
        return EXIT_ADVISORY
    _write_rows(
        run.path("trajectory.csv"),
        ["t", "m0", "m1"],
        ((_fmt(t), _fmt(a), _fmt(b)) for t, a, b in zip(traj.times, traj.m0, traj.m1)),
    )
    rows = []
    for t in snaps:
        k = int(np.argmin(np.abs(traj.times - t)))
        rows.extend((_fmt(traj.times[k]), _fmt(x), _fmt(v)) for x, v in zip(grid.nodes, traj.states[k]))
    _write_rows(run.path("snapshots.csv"), ["t", "x", "u"], rows)
    run.results = {
        "samples": int(traj.times.size),
        "min_value": traj.min_value,
        "final_m0": float(traj.m0[-1]),
        "final_m1": float(traj.m1[-1]),
    }
    if run.plot and traj.times.size > 1:
        from . import plotting

        plotting.moments(traj.times, traj.m0, traj.m1, run.path("moments.png"))
    return EXIT_OK


def _loglog_slope(ns, values) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope), float(intercept)


def cmd_convergence(run: Run) -> int:
    ns = _n_list(run, run.args.n_list)
    if len(ns) < 3:
        raise UsageError(f"--n-list needs at least 3 distinct sizes to fit a slope, got {ns}")
    rates = run.rates()
    run.prepare()
    if run.model == "sinko":
        exact = _exact(run, rates)
        if exact is None:
            r = sinko.necessary_condition(rates, run.x_max)
            run.results = {"status": "NotFound", "renewal_integral": r}
            print(f"no exact steady state: renewal integral {r:.8g} differs from 1", file=sys.stderr)
            return EXIT_NOT_FOUND
        errors = {}
        for n in ns:
            ss, _, _ = _steady(run, run.grid(n), rates)
            if ss is None:
                print(f"warning: no discrete steady state at n = {n}; skipped", file=sys.stderr)
                continue
            errors[n] = sup_error(ss.state, exact)
        if len(errors) < 2:
            return EXIT_NOT_FOUND
        _write_rows(run.path("convergence.csv"), ["n", "error_inf"], ((n, _fmt(e)) for n, e in errors.items()))
        slope, icpt = _loglog_slope(list(errors), list(errors.values()))
        run.results = {"slope": slope, "intercept": icpt, "quantity": "error_inf"}
        _write_json(run.path("convergence.json"), run.results)
        if run.plot:
            from . import plotting

            plotting.convergence(list(errors), list(errors.values()), run.path("convergence.png"), slope=slope)
        print(f"log-log slope {slope:.4f}")
        return EXIT_OK

    mom = {}
    for n in ns:
        ss, _, _ = _steady(run, run.grid(n), rates)
        if ss is None:
            print(f"warning: no steady state at n = {n}; skipped", file=sys.stderr)
            continue
        mom[n] = moments(ss.state)
    if len(mom) < 2:
        run.results = {"status": "NotFound"}
        return EXIT_NOT_FOUND
    ref = max(mom)
    r0, r1 = mom[ref]
    rows = [(n, _fmt(m0), _fmt(m1), _fmt(abs(m0 - r0)), _fmt(abs(m1 - r1))) for n, (m0, m1) in mom.items()]
    _write_rows(run.path("convergence.csv"), ["n", "m0", "m1", "d_m0", "d_m1"], rows)
    below = [n for n in mom if n != ref]
    fits = {"reference_n": ref}
    for k, name in ((0, "m0"), (1, "m1")):
        diffs = [abs(mom[n][k] - mom[ref][k]) for n in below]
        fits[f"slope_{name}"] = _loglog_slope(below, diffs)[0] if len(below) >= 2 and min(diffs) > 0 else None
    run.results = fits
    _write_json(run.path("convergence.json"), fits)
    if run.plot:
        from . import plotting

        plotting.moment_ladder(list(mom), [m[0] for m in mom.values()], [m[1] for m in mom.values()], run.path("moments.png"))
    return EXIT_OK


def cmd_spectrum(run: Run) -> int:
    ns = _n_list(run, run.args.n_list)
    scaled = run.args.scale_dx
    rates = run.rates()
    run.prepare()
    eig_rows, right_rows = [], []
    per_n, rightmost = {}, {}
    for n in ns:
        grid = run.grid(n)
        ss, report, _ = _steady(run, grid, rates)
        if ss is None:
            print(f"warning: no steady state at n = {n}; skipped", file=sys.stderr)
            right_rows.append((n, "", "NotFound"))
            continue
        factor = grid.dx if scaled else 1.0
        ev = np.sort_complex(report.spectrum.eigenvalues)[::-1] * factor
        eig_rows.extend((n, _fmt(z.real), _fmt(z.imag), int(scaled)) for z in ev)
        right_rows.append((n, _fmt(report.rightmost_re * factor), report.classification))
        per_n[n] = ev
        rightmost[n] = report.rightmost_re * factor
    _write_rows(run.path("eigenvalues.csv"), ["n", "re", "im", "scaled"], eig_rows)
    _write_rows(run.path("rightmost.csv"), ["n", "rightmost_re", "status"], right_rows)
    run.results = {"rightmost_re": rightmost, "scaled": scaled}
    if run.plot and per_n:
        from . import plotting

        plotting.spectra(per_n, rightmost, run.path("eigenvalues.png"), run.path("rightmost.png"), scaled=scaled)
    return EXIT_OK


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="structpop", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, grid=True):
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--out", default=".", help="output directory (default: current directory)")
        p.add_argument("--no-plot", action="store_true", help="skip PNG figures")
        if grid:
            p.add_argument("--n", type=int, help="number of grid cells (default 100)")
        p.add_argument("--x-max", dest="x_max", type=float, help="largest size")
        p.add_argument("--tol", type=float, help="Newton residual tolerance (default 1e-8*sqrt(n))")

    p = sub.add_parser("steady", help="steady state and its stability")
    common(p)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("sweep", help="existence and stability map over (a, b, c)")
    common(p)
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--steps", type=float, help="grid step for all three parameters")
    p.add_argument("--warm-start", action="store_true", help="seed each point from its neighbour in a")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column (output no longer reproducible)")
    p.add_argument("--scale-dx", dest="scaled", action="store_true", help="add rightmost_re multiplied by dx")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="integrate the model in time")
    common(p)
    p.add_argument("--t-end", dest="t_end", type=float, help="final time (default 10)")
    p.add_argument(
        "--ic",
        default="const:1",
        help="initial condition: const:<v>, steady[:<factor>] or file:<csv with u column>",
    )
    p.add_argument("--snapshots", help="comma-separated times for full-state output (default 0 and t_end)")
    p.add_argument("--implicit", action="store_true", help="use the implicit BDF integrator")
    p.add_argument("--rtol", type=float, default=1e-6)
    p.add_argument("--atol", type=float, default=1e-9)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("convergence", help="error or moment behaviour under grid refinement")
    common(p, grid=False)
    p.add_argument("--n-list", dest="n_list", help="comma-separated grid sizes")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("spectrum", help="Jacobian eigenvalues at the steady state for several n")
    common(p, grid=False)
    p.add_argument("--n-list", dest="n_list", help="comma-separated grid sizes")
    p.add_argument("--scale-dx", dest="scale_dx", action="store_true", help="multiply eigenvalues by dx")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    run = None
    try:
        run = Run(args.command, args)
        with threadpool_limits(1):
            code = args.func(run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        code = EXIT_ERROR
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_ERROR
    except NoSteadyStateError as exc:
        print(f"no steady state: {exc}", file=sys.stderr)
        code = EXIT_NOT_FOUND
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_ADVISORY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        code = EXIT_ERROR
    except StructPopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_ERROR
    if run is not None and run.prepared:
        try:
            run.write_manifest(code)
        except OSError as exc:
            print(f"I/O error writing manifest: {exc}", file=sys.stderr)
            code = EXIT_ERROR
    return code


if __name__ == "__main__":
    sys.exit(main())

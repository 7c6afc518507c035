"""Command line: ``ttkinetic run|convergence|selftest``.

Exit codes: 0 success, 1 self-test failure, 2 configuration error,
3 degenerate moments, 4 non-finite state.  Aborts print one line
``ABORT reason=<...> step=<k> t=<t> j=<j> substep=<label>`` on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, RunConfig, load_config
from .diagnostics import convergence_order, fit_damping_rate, v1_marginal
from .io import write_csv, write_tt3_file
from .kinetic_discretization import DegenerateStateError
from .projector_splitting import NonFiniteStateError
from .simulation import Simulation

__all__ = ["main", "cmd_run", "cmd_convergence", "cmd_selftest", "EXIT_OK", "EXIT_SELFTEST",
           "EXIT_CONFIG", "EXIT_DEGENERATE", "EXIT_NONFINITE", "OUTPUT_ROOT_ENV"]

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_NONFINITE = 4
OUTPUT_ROOT_ENV = "TTKINETIC_OUTPUT_ROOT"

TIMESERIES_HEADER = ("step", "t", "energy", "R1", "R2", "mass", "relative_error")
FIELDS_HEADER = ("t", "j", "x", "n", "u1", "T")
PHASE_HEADER = ("t", "j", "x", "k", "v1", "g")
CONVERGENCE_HEADER = ("level", "parameter", "h", "dt", "error", "fitted_order")

log = logging.getLogger("ttkinetic")


def _output_dir(cfg_path: str, run: RunConfig, override: Optional[str]) -> Path:
    if override:
        return Path(override)
    if run.output_dir:
        return Path(run.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV, "ttkinetic_out")
    return Path(root) / Path(cfg_path).stem


def _abort(exc) -> int:
    if isinstance(exc, DegenerateStateError):
        print(f"ABORT reason=degenerate step={exc.step} t={exc.t} j={exc.j} substep=moments", file=sys.stderr)
        return EXIT_DEGENERATE
    print(f"ABORT reason=nonfinite step={exc.step} t={exc.t} j={exc.j} substep={exc.substep}", file=sys.stderr)
    return EXIT_NONFINITE


def _limit_threads(n: int):
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _load(path: str, cadence: Optional[int]):
    run = load_config(path)
    if cadence is not None:
        if cadence < 1:
            raise ConfigError("--cadence must be >= 1")
        run = replace(run, cadence=cadence)
    return run


def _field_rows(snap):
    return [(snap.t, j, snap.x[j], snap.n[j], snap.u1[j], snap.T[j]) for j in range(len(snap.n))]


def _phase_rows(snap, sim):
    """v1-marginal ``g(x_j, v1_k)`` of the current state, one row per (j, k)."""
    vg = sim.cfg.vgrid
    g = v1_marginal(sim.state.field.tensor(), vg.dv)
    v = vg.points
    return [(snap.t, j, snap.x[j], k, v[k], g[j, k]) for j in range(g.shape[0]) for k in range(g.shape[1])]


def cmd_run(config_path: str, output_dir: Optional[str] = None, threads: Optional[int] = None,
            cadence: Optional[int] = None) -> int:
    """Run one configuration to its final time and write CSV (and TT3v1) outputs."""
    try:
        run = _load(config_path, cadence)
    except ConfigError as exc:
        print(f"ABORT reason=config detail={exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _output_dir(config_path, run, output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"ABORT reason=config detail=output directory not writable: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    series, fields, phase = [], [], []
    pending = sorted(run.field_times)
    code = EXIT_OK
    with _limit_threads(threads or run.threads):
        try:
            sim = Simulation(run.model, delta=run.delta, ranks=run.ranks, error=run.error)
        except DegenerateStateError as exc:
            return _abort(exc)
        last = None
        try:
            for snap in sim.iter_outputs(run.cadence):
                last = snap
                series.append((snap.step, snap.t, snap.energy if run.energy else None, snap.R1, snap.R2,
                               snap.mass, snap.relative_error))
                if snap.step == 0 or (pending and snap.t >= pending[0] - 1e-12):
                    if run.moments:
                        fields.extend(_field_rows(snap))
                    if run.phase:
                        phase.extend(_phase_rows(snap, sim))
                    while pending and snap.t >= pending[0] - 1e-12:
                        pending.pop(0)
                if run.snapshots:
                    write_tt3_file(out / f"snapshot_{snap.step:08d}.tt3", sim.state.field.tensor())
            if last is not None and last.step == sim.n_steps:
                if run.moments and (not fields or fields[-1][0] != last.t):
                    fields.extend(_field_rows(last))
                if run.phase and (not phase or phase[-1][0] != last.t):
                    phase.extend(_phase_rows(last, sim))
        except (DegenerateStateError, NonFiniteStateError) as exc:
            code = _abort(exc)
    write_csv(out / "timeseries.csv", TIMESERIES_HEADER, series)
    if run.moments:
        write_csv(out / "fields.csv", FIELDS_HEADER, fields)
    if run.phase:
        write_csv(out / "phase.csv", PHASE_HEADER, phase)
    if code == EXIT_OK and run.model.model == "vafp" and run.energy:
        t = [r[1] for r in series]
        e = [r[2] for r in series]
        try:
            rate = fit_damping_rate(t, e, run.fit_window)
            print(f"fitted_rate={rate:.6g} window={run.fit_window[0]:g},{run.fit_window[1]:g}")
        except ValueError as exc:
            print(f"fitted_rate=unavailable ({exc})")
    if code == EXIT_OK:
        print(f"ok steps={sim.n_steps} dt={sim.dt:.17g} output={out}")
    return code


def convergence_levels(run: RunConfig):
    """Model configurations of a refinement ladder, in the order given."""
    spec = run.convergence
    for value in spec.values:
        if spec.parameter == "dt":
            yield value, replace(run.model, dt=value, dt_rule="fixed")
        else:
            n_v = int(value)
            if n_v != value:
                raise ConfigError(f"n_v ladder values must be integers, got {value}")
            yield value, replace(run.model, n_v=n_v)


def cmd_convergence(config_path: str, output_dir: Optional[str] = None, threads: Optional[int] = None,
                    cadence: Optional[int] = None) -> int:
    """Run a refinement ladder and write ``convergence.csv`` with the fitted order."""
    try:
        run = _load(config_path, cadence)
        if run.convergence is None:
            raise ConfigError("missing [convergence] section")
        if run.model.model not in ("bgk_homog", "heat", "linear_fp"):
            raise ConfigError(f"model {run.model.model} has no exact solution to converge to")
        levels = list(convergence_levels(run))
    except (ConfigError, ValueError) as exc:
        print(f"ABORT reason=config detail={exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _output_dir(config_path, run, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    with _limit_threads(threads or run.threads):
        for value, cfg in levels:
            try:
                sim = Simulation(cfg, delta=run.delta, ranks=False, error=True)
                for snap in sim.iter_outputs(sim.n_steps):
                    pass
            except (DegenerateStateError, NonFiniteStateError) as exc:
                return _abort(exc)
            h = sim.dt if run.convergence.parameter == "dt" else cfg.vgrid.dv
            rows.append([value, h, sim.dt, snap.relative_error])
            print(f"level {len(rows)}: h={h:.6g} error={snap.relative_error:.6e}")
    order = convergence_order([r[1] for r in rows], [r[3] for r in rows])
    write_csv(out / "convergence.csv", CONVERGENCE_HEADER,
              [(i, r[0], r[1], r[2], r[3], order) for i, r in enumerate(rows)])
    print(f"fitted_order={order:.6g}")
    return EXIT_OK


def cmd_selftest(seed: int = 0, fault: Optional[str] = None) -> int:
    """Desk-scale dense-oracle and invariant checks; nonzero exit on any failure."""
    from .selftest import run_selftest

    report = run_selftest(seed=seed, fault=fault)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ttkinetic", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run a configuration"), ("convergence", "run a refinement ladder")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", help="configuration file")
        s.add_argument("--output-dir", default=None,
                       help=f"output directory (default: [output] directory, else ${OUTPUT_ROOT_ENV}/<config name>)")
        s.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
        s.add_argument("--cadence", type=int, default=None, help="write diagnostics every k steps")
    s = sub.add_parser("selftest", help="dense-oracle and invariant checks at desk scale")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--inject-fault", default=None, choices=("shape",), help=argparse.SUPPRESS)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        return cmd_selftest(seed=args.seed, fault=args.inject_fault)
    if args.threads is not None and args.threads < 1:
        print("ABORT reason=config detail=--threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    fn = cmd_run if args.command == "run" else cmd_convergence
    return fn(args.config, output_dir=args.output_dir, threads=args.threads, cadence=args.cadence)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: run a configured simulation, sweep step counts, validate.

    vesicle-sdc run CONFIG.json [--output DIR]
    vesicle-sdc sweep CONFIG.json --m 125,250,500 [--output DIR]
    vesicle-sdc validate CONFIG.json

A run writes ``steps.csv`` (one row per attempted step, flushed as it goes),
curve snapshots under ``snapshots/`` and ``summary.json``. A failing run keeps
whatever it wrote and records the failure in the summary.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .adaptive import BudgetExhausted, adaptive_run
from .curve import write_curve
from .dynamics import WorkCounter
from .sdc import sdc_step
from .stepper import BDF2, EULER, Solver, SolverOptions, StepRejected, provisional_step, relative_errors

log = logging.getLogger("vesicle_sdc")

OUTPUT_ENV = "VESICLE_SDC_OUTPUT"
CSV_COLUMNS = ("step", "t", "dt", "accepted", "e_A", "e_L", "step_e_A", "step_e_L",
               "gmres_iterations", "residuals", "note")


def output_root(cfg: cfgmod.RunConfig, override=None) -> Path:
    if override is not None:
        return Path(override)
    if cfg.output_dir is not None:
        return Path(cfg.output_dir)
    return Path(os.environ.get(OUTPUT_ENV, "runs")) / cfg.preset


class RunWriter:
    """Incremental CSV plus snapshot files for one run."""

    def __init__(self, root: Path, initial):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "snapshots").mkdir(exist_ok=True)
        self.initial = initial
        self.rows = 0
        self._fh = open(self.root / "steps.csv", "w", newline="")
        self._csv = csv.writer(self._fh)
        self._csv.writerow(CSV_COLUMNS)
        self._fh.flush()
        self.snapshots = 0
        # progress survives a failed run
        self.state = initial
        self.accepts = 0
        self.rejects = 0

    def row(self, t, dt, accepted, state, step_ea, step_el, iters, residuals, note=""):
        ea, el = relative_errors(self.initial, state)
        res = ";".join(f"{r:.6e}" for r in residuals)
        self._csv.writerow([self.rows, f"{t:.12g}", f"{dt:.12g}", int(bool(accepted)),
                            f"{ea:.6e}", f"{el:.6e}", _fmt(step_ea), _fmt(step_el),
                            iters, res, note])
        self._fh.flush()
        self.rows += 1
        if accepted:
            self.state = state
            self.accepts += 1
        else:
            self.rejects += 1

    def snapshot(self, state):
        for j, v in enumerate(state.vesicles):
            write_curve(self.root / "snapshots" / f"{self.snapshots:05d}_v{j}.txt", v.points)
        with open(self.root / "snapshots" / "times.txt", "a") as fh:
            fh.write(f"{self.snapshots:05d} {state.time:.12g}\n")
        self.snapshots += 1

    def close(self):
        self._fh.close()


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6e}"


def _step_errors(before, after):
    a0, l0 = before.areas(), before.lengths()
    return (float(np.max(np.abs(after.areas() - a0) / a0)),
            float(np.max(np.abs(after.lengths() - l0) / l0)))


def make_solver(cfg: cfgmod.RunConfig) -> Solver:
    return Solver(cfgmod.build_flow(cfg),
                  SolverOptions(tol=cfg.gmres_tol, max_iter=cfg.gmres_max_iter),
                  WorkCounter())


def _fixed(cfg, state0, solver, writer):
    dt = cfg.horizon / cfg.steps
    state, history = state0, [state0]
    for n in range(cfg.steps):
        t_end = state0.time + (n + 1) * dt
        if cfg.scheme == "sdc":
            new, diag = sdc_step(state, dt, cfg.p, cfg.n_sdc, solver)
            iters, residuals = int(sum(diag.gmres_iterations)), list(diag.residual_norms)
        else:
            scheme = BDF2 if cfg.scheme == "bdf2" and len(history) >= 2 else EULER
            new = provisional_step(history, dt, scheme, solver)
            iters, residuals = solver.last_iterations, []
        new.time = t_end
        sa, sl = _step_errors(state, new)
        writer.row(t_end, dt, True, new, sa, sl, iters, residuals)
        history = [new, state]
        state = new
        if cfg.snapshot_every and (n + 1) % cfg.snapshot_every == 0 and n + 1 < cfg.steps:
            writer.snapshot(state)
    return state, cfg.steps, 0


def _adaptive(cfg, state0, solver, writer):
    dt0 = cfg.dt0 if cfg.dt0 is not None else cfg.horizon / 100

    def callback(state, rec):
        writer.row(rec.time, rec.dt, rec.accepted, state, rec.area_error, rec.length_error,
                   rec.gmres_iterations, rec.residuals, rec.note)
        if (rec.accepted and cfg.snapshot_every and writer.accepts % cfg.snapshot_every == 0
                and state.time < state0.time + cfg.horizon):
            writer.snapshot(state)

    result = adaptive_run(state0, cfg.horizon, dt0, cfg.tolerance, solver, scheme=cfg.scheme,
                          p=cfg.p, n_sdc=cfg.n_sdc, budget_mode=cfg.budget_mode,
                          callback=callback)
    return result.final, result.accepts, result.rejects


def run(cfg: cfgmod.RunConfig, out=None) -> dict:
    """Run one configuration and write its artifacts; returns the summary."""
    cfg.validate()
    root = output_root(cfg, out)
    state0 = cfgmod.initial_state(cfg)
    solver = make_solver(cfg)
    writer = RunWriter(root, state0)
    (root / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    writer.snapshot(state0)
    summary = dict(preset=cfg.preset, scheme=cfg.scheme, mode=cfg.mode, n=cfg.n,
                   vesicles=cfg.m, horizon=cfg.horizon)
    start = time.perf_counter()
    state, status, message = state0, "ok", ""
    accepts = rejects = 0
    try:
        if cfg.mode == "fixed":
            state, accepts, rejects = _fixed(cfg, state0, solver, writer)
        else:
            state, accepts, rejects = _adaptive(cfg, state0, solver, writer)
        writer.snapshot(state)
    except (StepRejected, BudgetExhausted) as exc:
        status, message = "failed", str(exc)
        state, accepts, rejects = writer.state, writer.accepts, writer.rejects
        log.error("run failed: %s", exc)
    finally:
        writer.close()
    ea, el = relative_errors(state0, state)
    c = solver.counter
    summary.update(status=status, message=message, final_time=float(state.time),
                   e_A=ea, e_L=el, accepts=accepts, rejects=rejects,
                   wall_clock=time.perf_counter() - start, matvecs=c.matvecs,
                   factorizations=c.factorizations, gmres_iterations=c.gmres_iterations,
                   solves=c.solves)
    (root / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def convergence_table(steps, errors) -> dict:
    """Least-squares order of error against step count (error ~ steps^-order)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if steps.size < 2 or steps.size != errors.size:
        raise ValueError("a convergence table needs at least two runs of matching size")
    if np.any(errors <= 0) or np.any(steps <= 0):
        raise ValueError("steps and errors must be positive")
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    pairwise = list(np.log(errors[:-1] / errors[1:]) / np.log(steps[1:] / steps[:-1]))
    return dict(steps=steps.astype(int).tolist(), errors=errors.tolist(),
                order=float(-slope), pairwise=[float(x) for x in pairwise])


def sweep(cfg: cfgmod.RunConfig, step_counts, out=None) -> dict:
    if cfg.mode != "fixed":
        raise cfgmod.ConfigError("sweeps need a fixed-step configuration")
    root = output_root(cfg, out)
    rows = []
    for m in step_counts:
        sub = replace(cfg, steps=int(m), output_dir=None)
        rows.append(run(sub, root / f"m{int(m)}"))
    ok = [r for r in rows if r["status"] == "ok"]
    table = dict(runs=rows)
    if len(ok) >= 2:
        ms = [int(m) for m, r in zip(step_counts, rows) if r["status"] == "ok"]
        table["area"] = convergence_table(ms, [r["e_A"] for r in ok])
        table["length"] = convergence_table(ms, [r["e_L"] for r in ok])
    root.mkdir(parents=True, exist_ok=True)
    (root / "convergence.json").write_text(json.dumps(table, indent=2))
    return table


def _parse_steps(text: str):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad step list {text!r}") from exc
    if len(vals) < 2 or min(vals) < 1:
        raise argparse.ArgumentTypeError("need at least two positive step counts")
    return vals


def _load(path_or_preset: str) -> cfgmod.RunConfig:
    if path_or_preset in cfgmod.PRESETS and not Path(path_or_preset).exists():
        return cfgmod.preset(path_or_preset)
    return cfgmod.load(path_or_preset)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vesicle-sdc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config", help="JSON configuration file or preset name")
    p_run.add_argument("--output", default=None)
    p_sweep = sub.add_parser("sweep", help="repeat a fixed-step run at several step counts")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--m", "--steps", dest="steps", type=_parse_steps, required=True,
                         help="comma-separated step counts, e.g. 125,250,500")
    p_sweep.add_argument("--output", default=None)
    p_val = sub.add_parser("validate", help="check a configuration without running it")
    p_val.add_argument("config")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args.config)
        if args.command == "validate":
            cfgmod.build_flow(cfg)
            cfgmod.initial_state(cfg)
            print(json.dumps(cfg.to_dict(), indent=2))
            return 0
        if args.command == "run":
            summary = run(cfg, args.output)
            print(json.dumps(summary, indent=2))
            return 0 if summary["status"] == "ok" else 1
        table = sweep(cfg, args.steps, args.output)
        for key in ("area", "length"):
            if key in table:
                print(f"{key}: order {table[key]['order']:.3f}  errors {table[key]['errors']}")
        return 0 if all(r["status"] == "ok" for r in table["runs"]) else 1
    except (cfgmod.ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: single runs, ensembles, benches and validation.

Artifacts are written atomically into the output directory; repeated
invocations with the same flags and seed produce byte-identical CSV files.
Exit codes: 0 success, 1 oracle/validation failure, 2 usage error, 3 I/O
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .case import CaseError, load_case
from .dynamics import EquilibriumError, solve_equilibrium
from .em import EMConfig
from .ensemble import (
    Ensemble,
    StabilityCriterion,
    confidence_envelope,
    ensemble_stats,
    pdf_evolution,
    run_ensemble,
    stability_report,
)
from .network import NetworkCondition
from .noise import build_noise_path, path_to_csv
from .sas import SolverConfig
from .scenario import Scenario, ScenarioError, SimulationSetup, load_scenario
from .validate import run_all


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x) -> str:
    return f"{x:.17g}"


def _solver_config(args, scenario: Scenario):
    if args.solver == "sas":
        return SolverConfig(order=args.order, window=args.window)
    return EMConfig(dt=args.dt, mode=args.em_mode)


def _stats_variables(args, ensemble: Ensemble) -> list[str]:
    tr = ensemble.trajectories[0]
    first = tr.gen_buses[0]
    base = [f"g{first}.delta", f"g{first}.omega"]
    base += [f"v{b}" for b in tr.monitor_buses]
    if args.stats_vars == "all":
        base = tr.columns
    elif args.stats_vars:
        base = [v.strip() for v in args.stats_vars.split(",")]
    return base


def _stats_csv(ensemble: Ensemble, variables: list[str]) -> str:
    n = ensemble.n_runs
    cols = []
    header = ["t"]
    for var in variables:
        mean, std = ensemble_stats(ensemble, var)
        header += [f"{var}.mean", f"{var}.std"]
        cols += [mean, std]
        if n >= 10:
            lo, hi = confidence_envelope(ensemble, var, 0.9)
            header += [f"{var}.q05", f"{var}.q95"]
            cols += [lo, hi]
    lines = [",".join(header)]
    times = ensemble.times
    data = np.column_stack(cols)
    for i in range(times.shape[0]):
        lines.append(_fmt(times[i]) + "," + ",".join(_fmt(x) for x in data[i]))
    return "\n".join(lines) + "\n"


def _pdf_csv(ensemble: Ensemble, variables: list[str]) -> str:
    horizon = float(ensemble.times[-1])
    times = [float(t) for t in range(1, int(horizon) + 1)]
    lines = ["variable,t,mean,std,n"]
    for var in variables:
        for snap in pdf_evolution(ensemble, var, times):
            lines.append(
                f"{var},{_fmt(snap.time)},{_fmt(snap.mean)},{_fmt(snap.std)},{snap.count}"
            )
    return "\n".join(lines) + "\n"


def _progress(done: int, total: int) -> None:
    if done % 10 == 0 or done == total:
        print(f"completed {done}/{total} runs", flush=True)


def cmd_run(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    case = load_case(args.case)
    scenario = load_scenario(args.scenario)
    config = _solver_config(args, scenario)
    os.makedirs(args.out, exist_ok=True)

    manifest = {
        "tool": "stochsim",
        "version": __version__,
        "command": "run",
        "case": args.case,
        "scenario": args.scenario,
        "solver": args.solver,
        "config": config.__dict__,
        "runs": args.runs,
        "master_seed": args.seed,
        "jobs": args.jobs,
        "status": "failed",
        "artifacts": [],
    }
    try:
        setup = SimulationSetup.build(case, scenario)
        t0 = time.perf_counter()
        ensemble = run_ensemble(
            case,
            scenario,
            args.solver,
            config,
            args.runs,
            args.seed,
            jobs=args.jobs,
            setup=setup,
            progress=_progress,
        )
        total = time.perf_counter() - t0
        manifest["run_seeds"] = [list(s) for s in ensemble.run_seeds]
        manifest["run_seconds"] = ensemble.run_seconds
        manifest["total_seconds"] = total
        manifest["diverged"] = [tr.diverged for tr in ensemble.trajectories]

        artifacts = []
        if args.runs == 1:
            path = os.path.join(args.out, "trajectory.csv")
            _write_atomic(path, ensemble.trajectories[0].to_csv())
            artifacts.append(path)
        else:
            variables = _stats_variables(args, ensemble)
            path = os.path.join(args.out, "stats.csv")
            _write_atomic(path, _stats_csv(ensemble, variables))
            artifacts.append(path)
            path = os.path.join(args.out, "pdf.csv")
            _write_atomic(path, _pdf_csv(ensemble, variables))
            artifacts.append(path)
            if scenario.horizon_s > args.ts:
                x_eq = solve_equilibrium(
                    case, NetworkCondition("pre-fault"), dict(setup.mean_loads)
                )
                crit = StabilityCriterion(
                    t_s=args.ts, r0=args.r0, x_eq=x_eq, variables=args.stab_var
                )
                report = stability_report(ensemble, crit)
                path = os.path.join(args.out, "stability.json")
                _write_atomic(path, json.dumps(report, indent=1) + "\n")
                artifacts.append(path)
            else:
                manifest["stability"] = "skipped: horizon does not extend beyond t_s"
        if args.save_trajectories and args.runs > 1:
            for i, tr in enumerate(ensemble.trajectories):
                path = os.path.join(args.out, f"trajectory_{i:03d}.csv")
                _write_atomic(path, tr.to_csv())
                artifacts.append(path)
        if args.dump_noise:
            for i, seed in enumerate(ensemble.run_seeds):
                dt = (
                    scenario.resample_dt
                    if args.solver == "sas" or config.mode == "shared-path"
                    else config.dt
                )
                path_obj = build_noise_path(
                    seed, setup.n_noise_vars(), scenario.horizon_s, dt
                )
                path = os.path.join(args.out, f"noise_{i:03d}.csv")
                _write_atomic(path, path_to_csv(path_obj))
                artifacts.append(path)
        manifest["artifacts"] = artifacts
        manifest["status"] = "ok"
        return 0
    finally:
        _write_atomic(
            os.path.join(args.out, "manifest.json"),
            json.dumps(manifest, indent=1) + "\n",
        )


def cmd_bench(args) -> int:
    case = load_case(args.case)
    scenario = load_scenario(args.scenario)
    if args.horizon is not None:
        import dataclasses

        scenario = dataclasses.replace(scenario, horizon_s=args.horizon)
    solvers = [s.strip() for s in args.solvers.split(",")]
    if not solvers or any(s not in ("sas", "em") for s in solvers):
        raise UsageError("--solvers must list sas and/or em")
    os.makedirs(args.out, exist_ok=True)

    setup = SimulationSetup.build(case, scenario)
    report = {
        "tool": "stochsim",
        "version": __version__,
        "command": "bench",
        "case": args.case,
        "scenario": args.scenario,
        "runs": args.runs,
        "master_seed": args.seed,
        "step": args.window,
        "solvers": {},
    }
    timings = []
    for idx, solver in enumerate(solvers):
        if solver == "sas":
            config = SolverConfig(order=args.order, window=args.window)
        else:
            # matched step sizes: the EM step equals the window length
            config = EMConfig(dt=args.window, mode=args.em_mode)
        t0 = time.perf_counter()
        ensemble = run_ensemble(
            case, scenario, solver, config, args.runs, args.seed,
            jobs=args.jobs, setup=setup, progress=_progress,
        )
        total = time.perf_counter() - t0
        key = solver if solver not in report["solvers"] else f"{solver}#{idx}"
        report["solvers"][key] = {
            "config": config.__dict__,
            "total_seconds": total,
            "per_run_seconds": ensemble.run_seconds,
            "mean_run_seconds": float(np.mean(ensemble.run_seconds)),
        }
        timings.append((key, total))
        print(f"{key}: {total:.2f} s total, {total/args.runs:.3f} s per run")
    if len(timings) == 2:
        (name_a, t_a), (name_b, t_b) = timings
        report["ratio"] = {
            "definition": f"{name_b} / {name_a}",
            "value": t_b / t_a,
        }
        print(f"wall-clock ratio {name_b}/{name_a} = {t_b/t_a:.3f}")
    _write_atomic(
        os.path.join(args.out, "bench.json"), json.dumps(report, indent=1) + "\n"
    )
    return 0


def cmd_validate(args) -> int:
    case = load_case(args.case)
    results = run_all(case, quick=args.quick, inject_error=args.inject_smib_error)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(r.line())
    if failed:
        print(f"{len(failed)} check(s) failed: " + ", ".join(r.name for r in failed))
        return 1
    print("all checks passed")
    return 0


class UsageError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochsim",
        description="Stochastic transient-stability simulation of power systems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one run or a seeded ensemble")
    run.add_argument("--case", required=True)
    run.add_argument("--scenario", required=True)
    run.add_argument("--solver", choices=("sas", "em"), default="sas")
    run.add_argument("--runs", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--order", type=int, default=2, help="series order (sas)")
    run.add_argument("--window", type=float, default=1e-3, help="window length s (sas)")
    run.add_argument("--dt", type=float, default=1e-3, help="integration step s (em)")
    run.add_argument(
        "--em-mode", choices=("shared-path", "paper-sde"), default="shared-path"
    )
    run.add_argument("--out", default="out")
    run.add_argument(
        "--jobs", type=int, default=int(os.environ.get("STOCHSIM_JOBS", "1"))
    )
    run.add_argument("--ts", type=float, default=15.0, help="stability settling time")
    run.add_argument("--r0", type=float, default=0.05, help="stability radius")
    run.add_argument("--stab-var", choices=("speed", "angle"), default="speed")
    run.add_argument("--stats-vars", default=None)
    run.add_argument("--save-trajectories", action="store_true")
    run.add_argument("--dump-noise", action="store_true")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="time both solvers on identical seeds")
    bench.add_argument("--case", required=True)
    bench.add_argument("--scenario", required=True)
    bench.add_argument("--solvers", default="sas,em")
    bench.add_argument("--runs", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--order", type=int, default=2)
    bench.add_argument("--window", type=float, default=1e-3, help="matched step size")
    bench.add_argument(
        "--em-mode", choices=("shared-path", "paper-sde"), default="paper-sde"
    )
    bench.add_argument("--horizon", type=float, default=None)
    bench.add_argument("--out", default="out")
    bench.add_argument(
        "--jobs", type=int, default=int(os.environ.get("STOCHSIM_JOBS", "1"))
    )
    bench.set_defaults(func=cmd_bench)

    val = sub.add_parser("validate", help="run the cross-module oracle checks")
    val.add_argument("--case", default="cases/smib.json")
    val.add_argument("--quick", action="store_true")
    val.add_argument(
        "--inject-smib-error", type=float, default=0.0,
        help="test-mode fault injection into the hand coefficients",
    )
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except (CaseError, ScenarioError, ValueError, EquilibriumError) as exc:
        print(f"error: invalid-input: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

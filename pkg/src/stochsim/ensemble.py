"""Monte Carlo ensembles and their statistical products.

Runs are seeded independently from a master seed (run i uses
SeedSequence([master, i])), so an ensemble is reproducible under any degree
of parallelism.  All statistics are computed order-independently: values
are sorted along the run axis before reduction, so permuting the
trajectories changes nothing, bit for bit.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .case import SystemCase
from .em import EMConfig, simulate_em
from .noise import build_noise_path
from .sas import SolverConfig, simulate_sas
from .scenario import Scenario, SimulationSetup, run_simulation
from .trajectory import Trajectory


@dataclass
class Ensemble:
    """Aligned trajectories from repeated runs of one scenario."""

    trajectories: list[Trajectory]
    master_seed: int
    run_seeds: list[tuple]
    solver: str
    scenario: Scenario
    run_seconds: list[float] = field(default_factory=list)

    @property
    def n_runs(self) -> int:
        return len(self.trajectories)

    @property
    def times(self) -> np.ndarray:
        return self.trajectories[0].times

    def values(self, variable: str) -> np.ndarray:
        """(n_runs, T) matrix of one variable across the ensemble."""
        return np.stack([tr.value(variable) for tr in self.trajectories])


@dataclass(frozen=True)
class StabilityCriterion:
    """Stay-within-a-ball criterion evaluated after a settling time.

    A run passes when the chosen norm of the monitored deviations from the
    equilibrium stays below ``r0`` at every grid time beyond ``t_s``.
    ``variables`` is "speed", "angle", or an explicit column list; ``x_eq``
    is the packed equilibrium state the deviations refer to.
    """

    t_s: float
    r0: float
    x_eq: np.ndarray
    variables: str | tuple[str, ...] = "speed"
    norm: str = "inf"

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")

    def columns(self, trajectory: Trajectory) -> list[str]:
        if self.variables == "speed":
            return [f"g{b}.omega" for b in trajectory.gen_buses]
        if self.variables == "angle":
            return [f"g{b}.delta" for b in trajectory.gen_buses]
        return list(self.variables)

    def references(self, trajectory: Trajectory) -> np.ndarray:
        k = trajectory.n_gen
        refs = []
        for col in self.columns(trajectory):
            name, _, fldname = col.partition(".")
            block = {"delta": 0, "omega": 1, "eqp": 2, "edp": 3}[fldname]
            g = trajectory.gen_buses.index(int(name[1:]))
            refs.append(self.x_eq[block * k + g])
        return np.array(refs)


@dataclass(frozen=True)
class PdfSnapshot:
    """Normal fit of one variable's ensemble distribution at one instant."""

    time: float
    variable: str
    mean: float
    std: float
    count: int


def _run_seed(master_seed: int, run_index: int) -> tuple:
    return (master_seed, run_index)


def _single_run(setup, solver, config, master_seed, run_index):
    scenario = setup.scenario
    seed = _run_seed(master_seed, run_index)
    n_vars = setup.n_noise_vars()
    t0 = time.perf_counter()
    if solver == "sas":
        horizon = config.horizon if config.horizon is not None else scenario.horizon_s
        path = build_noise_path(seed, n_vars, horizon, scenario.resample_dt)
        traj = simulate_sas(setup.case, scenario, config, path, setup=setup)
    elif solver == "em":
        dt = scenario.resample_dt if config.mode == "shared-path" else config.dt
        path = build_noise_path(seed, n_vars, scenario.horizon_s, dt)
        traj = simulate_em(setup.case, scenario, config, path, setup=setup)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return traj, time.perf_counter() - t0


_WORKER_STATE: dict = {}


def _worker_init(setup, solver, config, master_seed):
    _WORKER_STATE["args"] = (setup, solver, config, master_seed)


def _worker_run(run_index):
    setup, solver, config, master_seed = _WORKER_STATE["args"]
    return _single_run(setup, solver, config, master_seed, run_index)


def run_ensemble(
    case: SystemCase,
    scenario: Scenario,
    solver: str,
    config: SolverConfig | EMConfig,
    n_runs: int,
    master_seed: int,
    jobs: int = 1,
    setup: SimulationSetup | None = None,
    progress=None,
) -> Ensemble:
    """Simulate ``n_runs`` independently seeded runs of one scenario.

    Diverged runs are kept (they count as unstable later).  With ``jobs`` >
    1 the runs execute in worker processes; results are assembled in run
    order, so the ensemble is identical whatever the parallelism.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    if setup is None:
        setup = SimulationSetup.build(case, scenario)

    results: list = [None] * n_runs
    if jobs > 1 and n_runs > 1:
        import multiprocessing as mp

        ctx = mp.get_context("spawn")
        with ctx.Pool(
            processes=min(jobs, n_runs),
            initializer=_worker_init,
            initargs=(setup, solver, config, master_seed),
        ) as pool:
            for i, res in enumerate(pool.map(_worker_run, range(n_runs))):
                results[i] = res
                if progress:
                    progress(i + 1, n_runs)
    else:
        for i in range(n_runs):
            results[i] = _single_run(setup, solver, config, master_seed, i)
            if progress:
                progress(i + 1, n_runs)

    return Ensemble(
        trajectories=[r[0] for r in results],
        master_seed=master_seed,
        run_seeds=[_run_seed(master_seed, i) for i in range(n_runs)],
        solver=solver,
        scenario=scenario,
        run_seconds=[r[1] for r in results],
    )


def ensemble_stats(ensemble: Ensemble, variable: str):
    """Pointwise sample mean and standard deviation (n-1 denominator).

    A single-run ensemble reports zero deviation and emits a warning.
    """
    vals = np.sort(ensemble.values(variable), axis=0)
    mean = vals.mean(axis=0)
    if ensemble.n_runs == 1:
        warnings.warn(
            "standard deviation of a single-run ensemble reported as 0",
            stacklevel=2,
        )
        return mean, np.zeros_like(mean)
    std = vals.std(axis=0, ddof=1)
    return mean, std


def confidence_envelope(ensemble: Ensemble, variable: str, level: float = 0.9):
    """Pointwise empirical quantile band at the given coverage level."""
    if not 0.0 <= level <= 1.0:
        raise ValueError("level must lie in [0, 1]")
    if ensemble.n_runs < 10:
        raise ValueError("at least 10 runs are needed for a quantile envelope")
    vals = ensemble.values(variable)
    lo = (1.0 - level) / 2.0
    qs = np.quantile(vals, [lo, 1.0 - lo], axis=0, method="linear")
    return qs[0], qs[1]


def pdf_evolution(ensemble: Ensemble, variable: str, times) -> list[PdfSnapshot]:
    """Per-instant normal fits (sample mean/std) of one variable."""
    grid = ensemble.times
    vals = np.sort(ensemble.values(variable), axis=0)
    out = []
    for t in times:
        idx = int(np.argmin(np.abs(grid - t)))
        if abs(grid[idx] - t) > 1e-9 + 1e-6 * max(abs(t), 1.0):
            raise ValueError(f"time {t} is not on the ensemble grid")
        col = vals[:, idx]
        std = float(col.std(ddof=1)) if ensemble.n_runs > 1 else 0.0
        out.append(
            PdfSnapshot(
                time=float(grid[idx]),
                variable=variable,
                mean=float(col.mean()),
                std=std,
                count=ensemble.n_runs,
            )
        )
    return out


def run_passes(trajectory: Trajectory, crit: StabilityCriterion) -> bool:
    """Whether one run stays within r0 of the equilibrium beyond t_s."""
    if trajectory.diverged:
        return False
    mask = trajectory.times > crit.t_s
    if not mask.any():
        raise ValueError("no grid times beyond t_s")
    cols = crit.columns(trajectory)
    refs = crit.references(trajectory)
    dev = np.stack([trajectory.value(c)[mask] for c in cols]) - refs[:, None]
    if crit.norm == "inf":
        norms = np.abs(dev).max(axis=0)
    elif crit.norm == "2":
        norms = np.sqrt((dev * dev).sum(axis=0))
    else:
        raise ValueError(f"unknown norm {crit.norm!r}")
    return bool(np.all(norms < crit.r0))


def stability_probability(ensemble: Ensemble, crit: StabilityCriterion) -> float:
    """Fraction of runs that stay within r0 of the equilibrium after t_s."""
    passes = [run_passes(tr, crit) for tr in ensemble.trajectories]
    return sum(passes) / len(passes)


def stability_report(ensemble: Ensemble, crit: StabilityCriterion) -> dict:
    """Criterion echo, per-run pass/fail and the probability, for artifacts."""
    passes = [run_passes(tr, crit) for tr in ensemble.trajectories]
    return {
        "criterion": {
            "t_s": crit.t_s,
            "r0": crit.r0,
            "variables": crit.variables
            if isinstance(crit.variables, str)
            else list(crit.variables),
            "norm": crit.norm,
        },
        "runs": [bool(p) for p in passes],
        "probability": sum(passes) / len(passes),
    }

"""Scenarios (fault + noise description) and the shared simulation driver.

The driver owns everything both solvers have in common: the stage schedule
(pre-fault / fault-on / post-fault with exact event times, splitting steps
at stage boundaries), resampling of the stochastic loads, network rebuilds,
divergence detection and output recording.  Solvers plug in a stepper that
advances the state across one segment under a frozen network.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .case import SystemCase
from .dynamics import MachineSet, init_dynamic_state, split_state
from .network import NetworkCondition, assemble_bus_matrix, kron_reduce, ReducedNetwork
from .noise import NoisePath, StochasticLoadSpec, load_schedule
from .powerflow import solve_power_flow
from .trajectory import Trajectory

DIVERGENCE_LIMIT = 1e6  # any state beyond this magnitude marks the run unstable


class ScenarioError(ValueError):
    """Scenario file is malformed or inconsistent with the case."""


@dataclass(frozen=True)
class Scenario:
    """Disturbance plus stochastic-load description for one study.

    ``stochastic_buses`` may be a list of load bus ids or "all";
    ``fault_bus`` of None means an undisturbed run.
    """

    horizon_s: float
    fault_bus: int | None = None
    fault_start_s: float = 1.0
    fault_duration_cycles: float = 10.0
    trip_branches: tuple[tuple[int, int], ...] = ()
    stochastic_buses: tuple[int, ...] | str = ()
    sigma_rel: float = 0.0
    drift_a: float = 0.5
    resample_dt: float = 0.1
    monitor_buses: tuple[int, ...] = ()
    name: str = ""

    def fault_times(self, case: SystemCase) -> tuple[float, float] | None:
        """(start, clearing) times in seconds, or None without a fault."""
        if self.fault_bus is None:
            return None
        return (
            self.fault_start_s,
            self.fault_start_s + self.fault_duration_cycles / case.frequency_hz,
        )

    def resolve_stochastic_buses(self, case: SystemCase) -> tuple[int, ...]:
        load_buses = sorted(ld.bus for ld in case.loads)
        if isinstance(self.stochastic_buses, str):
            if self.stochastic_buses != "all":
                raise ScenarioError("stochastic_buses must be a list or 'all'")
            return tuple(load_buses)
        return tuple(sorted(self.stochastic_buses))

    def validate_against(self, case: SystemCase) -> None:
        if self.horizon_s <= 0:
            raise ScenarioError("horizon_s must be positive")
        if self.fault_bus is not None:
            case.bus_index(self.fault_bus)
            if self.fault_duration_cycles <= 0:
                raise ScenarioError("fault duration must be positive")
            _, t_clear = self.fault_times(case)
            if self.horizon_s <= t_clear:
                raise ScenarioError("horizon must extend beyond fault clearing")
            for a, b in self.trip_branches:
                if not case.has_branch(a, b):
                    raise ScenarioError(f"tripped branch {a}-{b} not in case")
        load_buses = {ld.bus for ld in case.loads}
        for bus in self.resolve_stochastic_buses(case):
            if bus not in load_buses:
                raise ScenarioError(f"stochastic bus {bus} carries no load")
        for bus in self.monitor_buses:
            case.bus_index(bus)
        if self.sigma_rel < 0:
            raise ScenarioError("sigma_rel must be nonnegative")
        if self.resample_dt <= 0 or self.drift_a <= 0:
            raise ScenarioError("resample_dt and drift_a must be positive")


def parse_scenario(text: str, name: str = "") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    if "horizon_s" not in doc:
        raise ScenarioError("missing field 'horizon_s'")
    stoch = doc.get("stochastic_buses", [])
    if not isinstance(stoch, str):
        stoch = tuple(int(b) for b in stoch)
    return Scenario(
        horizon_s=float(doc["horizon_s"]),
        fault_bus=doc.get("fault_bus"),
        fault_start_s=float(doc.get("fault_start_s", 1.0)),
        fault_duration_cycles=float(doc.get("fault_duration_cycles", 10.0)),
        trip_branches=tuple(
            (int(a), int(b)) for a, b in doc.get("trip_branches", [])
        ),
        stochastic_buses=stoch,
        sigma_rel=float(doc.get("sigma_rel", 0.0)),
        drift_a=float(doc.get("drift_a", 0.5)),
        resample_dt=float(doc.get("resample_dt", 0.1)),
        monitor_buses=tuple(int(b) for b in doc.get("monitor_buses", [])),
        name=name or doc.get("name", ""),
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read(), name=str(path))


@dataclass
class SimulationSetup:
    """Pre-fault solution and cached stage matrices shared by all runs.

    Immutable after construction; safe to share across concurrent workers.
    """

    case: SystemCase
    scenario: Scenario
    profile: np.ndarray
    machines: MachineSet  # with efd/pm inputs
    x0: np.ndarray
    specs: list[StochasticLoadSpec]
    mean_loads: dict[int, tuple[float, float]]
    stage_matrices: dict[str, np.ndarray]  # augmented (n+K) base, loads excluded
    load_rows: np.ndarray  # positions of load buses in the augmented matrix
    load_vm2: np.ndarray  # |V|^2 at load buses from the pre-fault profile
    monitor_rows: np.ndarray  # recovery-row positions of monitored buses

    @classmethod
    def build(cls, case: SystemCase, scenario: Scenario) -> "SimulationSetup":
        scenario.validate_against(case)
        profile = solve_power_flow(case)
        init = init_dynamic_state(case, profile)

        stoch = scenario.resolve_stochastic_buses(case)
        specs = []
        for bus in stoch:
            ld = case.load_at(bus)
            specs.append(
                StochasticLoadSpec.from_sigma(
                    bus, ld.p, ld.q, scenario.sigma_rel, scenario.drift_a
                )
            )
        mean_loads = {ld.bus: (ld.p, ld.q) for ld in case.loads}

        n, k = case.n_bus, case.n_gen
        conditions = {"pre-fault": NetworkCondition("pre-fault")}
        if scenario.fault_bus is not None:
            conditions["fault-on"] = NetworkCondition(
                "fault-on", fault_bus=scenario.fault_bus
            )
            conditions["post-fault"] = NetworkCondition(
                "post-fault", removed_branches=scenario.trip_branches
            )
        stage_matrices = {}
        for stage, cond in conditions.items():
            y = np.zeros((n + k, n + k), dtype=complex)
            y[:n, :n] = assemble_bus_matrix(case, cond)
            for g_idx, gen in enumerate(case.generators):
                i = case.bus_index(gen.bus)
                m = n + g_idx
                ys = 1.0 / (gen.Rs + 1j * gen.xdp)
                y[m, m] += ys
                y[i, i] += ys
                y[m, i] -= ys
                y[i, m] -= ys
            stage_matrices[stage] = y

        load_buses = sorted(mean_loads)
        load_rows = np.array([case.bus_index(b) for b in load_buses], dtype=int)
        load_vm2 = np.abs(profile[load_rows]) ** 2
        monitor_rows = np.array(
            [case.bus_index(b) for b in scenario.monitor_buses], dtype=int
        )
        return cls(
            case=case,
            scenario=scenario,
            profile=profile,
            machines=init.machines,
            x0=init.state,
            specs=specs,
            mean_loads=mean_loads,
            stage_matrices=stage_matrices,
            load_rows=load_rows,
            load_vm2=load_vm2,
            monitor_rows=monitor_rows,
        )

    @property
    def load_buses(self) -> list[int]:
        return sorted(self.mean_loads)

    def build_net(self, stage: str, loads: dict[int, tuple[float, float]]) -> ReducedNetwork:
        """Reduced network for a stage with the current load values."""
        n, k = self.case.n_bus, self.case.n_gen
        y = self.stage_matrices[stage].copy()
        pq = np.array([loads[b] for b in self.load_buses], dtype=float)
        y[self.load_rows, self.load_rows] += (pq[:, 0] - 1j * pq[:, 1]) / self.load_vm2
        y_red, recovery = kron_reduce(y, np.arange(n, n + k))
        return ReducedNetwork(
            y=y_red,
            recovery=recovery,
            gen_buses=tuple(g.bus for g in self.case.generators),
            bus_ids=tuple(b.id for b in self.case.buses),
            stage=stage,
            loads=loads,
        )

    def n_noise_vars(self) -> int:
        return 2 * len(self.specs)


def _grid_steps(horizon: float, h: float) -> int:
    n = round(horizon / h)
    if n < 1 or abs(n * h - horizon) > 1e-9:
        raise ValueError(f"horizon {horizon} is not a multiple of the step {h}")
    return n


def _exact_multiple(big: float, small: float) -> int:
    m = round(big / small)
    if m < 1 or abs(m * small - big) > 1e-9:
        raise ValueError(f"{big} must be an integer multiple of {small}")
    return m


def _emf(state: np.ndarray) -> np.ndarray:
    delta, _, eqp, edp = split_state(state)
    sin_d, cos_d = np.sin(delta), np.cos(delta)
    return (edp * sin_d + eqp * cos_d) + 1j * (eqp * sin_d - edp * cos_d)


def run_simulation(
    setup: SimulationSetup,
    h: float,
    step_fn,
    solver: str,
    path: NoisePath | None = None,
    em_continuous: bool = False,
    out_stride: int = 1,
    horizon: float | None = None,
) -> Trajectory:
    """Drive one simulation run on the output grid of step ``h``.

    ``step_fn(state, net, dt)`` advances the state across one segment with a
    frozen network.  Stage boundaries are honored exactly by splitting the
    enclosing step; stochastic loads advance at resample boundaries (or at
    every step when ``em_continuous``), after which the reduced network is
    rebuilt.  A non-finite or huge state marks the trajectory diverged; the
    remaining rows stay NaN.
    """
    sc = setup.scenario
    case = setup.case
    if horizon is None:
        horizon = sc.horizon_s
    n_steps = _grid_steps(horizon, h)
    specs = setup.specs

    schedule = None
    spr = None
    if specs and not em_continuous:
        spr = _exact_multiple(sc.resample_dt, h)
        if path is None:
            raise ValueError("a noise path is required for stochastic runs")
        need = int(math.ceil(n_steps / spr - 1e-12))
        if path.n_vars != setup.n_noise_vars() or path.n_steps < need:
            raise ValueError("noise path does not cover this scenario")
        schedule = load_schedule(specs, path)
    a_vec = b_vec = eps = None
    if specs and em_continuous:
        if path is None:
            raise ValueError("a noise path is required for stochastic runs")
        if path.n_vars != setup.n_noise_vars() or path.n_steps < n_steps:
            raise ValueError("noise path does not cover this scenario")
        if abs(path.dt - h) > 1e-12:
            raise ValueError("continuous mode expects a noise path sampled at dt")
        a_vec = np.empty(2 * len(specs))
        b_vec = np.empty(2 * len(specs))
        for i, spec in enumerate(specs):
            a_vec[2 * i], b_vec[2 * i] = spec.ou_p.a, spec.ou_p.b
            a_vec[2 * i + 1], b_vec[2 * i + 1] = spec.ou_q.a, spec.ou_q.b
        eps = np.zeros(2 * len(specs))

    events: list[tuple[float, str]] = []
    ft = sc.fault_times(case)
    if ft is not None:
        events = [(ft[0], "fault-on"), (ft[1], "post-fault")]

    stage = "pre-fault"
    loads = dict(setup.mean_loads)
    net = setup.build_net(stage, loads)

    n_rec = n_steps // out_stride + 1
    k4 = setup.x0.shape[0]
    times = np.arange(n_rec) * (out_stride * h)
    states = np.full((n_rec, k4), np.nan)
    n_mon = setup.monitor_rows.shape[0]
    volts = np.full((n_rec, n_mon), np.nan)

    def record(i: int, x: np.ndarray, current_net: ReducedNetwork) -> None:
        states[i] = x
        if n_mon:
            volts[i] = np.abs(
                current_net.recovery[setup.monitor_rows] @ _emf(x)
            )

    x = setup.x0.copy()
    record(0, x, net)
    sqrt_h = math.sqrt(h)
    diverged = False
    t_div = None
    ev_idx = 0
    tol = 1e-9

    for k in range(n_steps):
        t0 = k * h
        t1 = (k + 1) * h
        rebuilt = False
        if spr is not None and k > 0 and k % spr == 0:
            row = schedule[k // spr]
            for i, spec in enumerate(specs):
                loads[spec.bus] = (row[2 * i], row[2 * i + 1])
            rebuilt = True
        elif em_continuous and specs:
            if k > 0:
                eps += -a_vec * eps * h + b_vec * (sqrt_h * path.xi[:, k - 1])
                for i, spec in enumerate(specs):
                    loads[spec.bus] = (
                        spec.p_mean + eps[2 * i],
                        spec.q_mean + eps[2 * i + 1],
                    )
                rebuilt = True
        while ev_idx < len(events) and events[ev_idx][0] <= t0 + tol:
            stage = events[ev_idx][1]
            ev_idx += 1
            rebuilt = True
        if rebuilt:
            net = setup.build_net(stage, loads)

        if ev_idx < len(events) and events[ev_idx][0] < t1 - tol:
            a = t0
            while ev_idx < len(events) and events[ev_idx][0] < t1 - tol:
                tb, new_stage = events[ev_idx]
                ev_idx += 1
                x = step_fn(x, net, tb - a)
                stage = new_stage
                net = setup.build_net(stage, loads)
                a = tb
            x = step_fn(x, net, t1 - a)
        else:
            x = step_fn(x, net, h)

        peak = np.abs(x).max()
        if not (peak < DIVERGENCE_LIMIT):  # catches NaN as well
            diverged = True
            t_div = t1
            break
        if (k + 1) % out_stride == 0:
            record((k + 1) // out_stride, x, net)

    return Trajectory(
        times=times,
        states=states,
        gen_buses=tuple(g.bus for g in case.generators),
        solver=solver,
        monitor_buses=tuple(sc.monitor_buses),
        voltages=volts,
        diverged=diverged,
        t_diverged=t_div,
    )

"""Windowed truncated power-series solver for the machine/network model.

Per window the solver computes series terms of the state about the window
start by recursion on orders: the order-n coefficient of the right-hand
side, evaluated through truncated series arithmetic with the current load
values frozen as parameters, yields the order-(n+1) state coefficient after
time integration.  For the analytic right-hand side used here the terms
coincide with the decomposition-method terms, so evaluating the order-N
partial sum across the window reproduces the semi-analytical solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .case import SystemCase
from .dynamics import MachineSet
from .network import ReducedNetwork
from .noise import NoisePath
from .scenario import Scenario, SimulationSetup, run_simulation
from .series import series_eval
from .trajectory import Trajectory


@dataclass(frozen=True)
class SolverConfig:
    """Series order, window length and grid settings for the solver.

    ``horizon`` and ``resample_dt`` default to the scenario's values.
    """

    order: int = 2
    window: float = 1e-3
    horizon: float | None = None
    resample_dt: float | None = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("series order must be at least 1")
        if self.window <= 0:
            raise ValueError("window length must be positive")


@dataclass(frozen=True)
class SASWindow:
    """Series coefficients of every state variable on one window.

    ``coeffs`` is (4K, N+1) in the packed state layout; the local clock runs
    from 0 at ``t0`` to ``length``.  ``loads`` are the stochastic values the
    window was derived with.
    """

    t0: float
    length: float
    coeffs: np.ndarray
    loads: dict = field(compare=False, default_factory=dict)

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    @property
    def order(self) -> int:
        return self.coeffs.shape[1] - 1


def taylor_window(f_series, x0, order: int) -> np.ndarray:
    """Series coefficients for a generic ODE xdot = f(x) on one window.

    ``f_series`` maps an (M, order+1) coefficient stack to the coefficient
    stack of the right-hand side (built from the series primitives).  Only
    the order-n output column is consumed when forming the order-(n+1)
    state column, matching the term-by-term decomposition recursion.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    c = np.zeros((x0.shape[0], order + 1))
    c[:, 0] = x0
    for n in range(order):
        fc = np.atleast_2d(f_series(c))
        c[:, n + 1] = fc[:, n] / (n + 1)
    return c


def _conv(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Order-n Cauchy coefficient of a*b for (K, N+1) stacks."""
    if n == 0:
        return a[:, 0] * b[:, 0]
    return np.einsum("km,km->k", a[:, : n + 1], b[:, n::-1])


def window_coefficients(
    state0: np.ndarray, net: ReducedNetwork, machines: MachineSet, order: int
) -> np.ndarray:
    """Series coefficients of the machine states about ``state0``.

    Order-incremental evaluation of the model through series arithmetic:
    trigonometric recurrences for sin/cos of the rotor angles, Cauchy
    products for the frame rotations and powers, one complex matrix-vector
    product per order for the network coupling.
    """
    k = machines.n_gen
    n1 = order + 1
    d = np.zeros((k, n1))
    w = np.zeros((k, n1))
    eq = np.zeros((k, n1))
    ed = np.zeros((k, n1))
    d[:, 0] = state0[:k]
    w[:, 0] = state0[k : 2 * k]
    eq[:, 0] = state0[2 * k : 3 * k]
    ed[:, 0] = state0[3 * k :]

    s = np.zeros((k, n1))
    c = np.zeros((k, n1))
    ere = np.zeros((k, n1))
    eim = np.zeros((k, n1))
    i_r = np.zeros((k, n1))
    i_i = np.zeros((k, n1))
    i_d = np.zeros((k, n1))
    i_q = np.zeros((k, n1))
    e_qt = np.zeros((k, n1))
    e_dt = np.zeros((k, n1))
    p_e = np.zeros((k, n1))

    w_r = machines.omega_r
    half_h = w_r / (2.0 * machines.H)
    dx_d = machines.xd - machines.xdp
    dx_q = machines.xq - machines.xqp

    for n in range(order):
        if n == 0:
            s[:, 0] = np.sin(d[:, 0])
            c[:, 0] = np.cos(d[:, 0])
        else:
            m = np.arange(1, n + 1)
            md = m * d[:, 1 : n + 1]
            s[:, n] = np.einsum("km,km->k", md, c[:, n - 1 :: -1][:, :n]) / n
            c[:, n] = -np.einsum("km,km->k", md, s[:, n - 1 :: -1][:, :n]) / n
        ere[:, n] = _conv(ed, s, n) + _conv(eq, c, n)
        eim[:, n] = _conv(eq, s, n) - _conv(ed, c, n)
        it = net.y @ (ere[:, n] + 1j * eim[:, n])
        i_r[:, n] = it.real
        i_i[:, n] = it.imag
        i_q[:, n] = _conv(i_i, s, n) + _conv(i_r, c, n)
        i_d[:, n] = _conv(i_r, s, n) - _conv(i_i, c, n)
        e_qt[:, n] = eq[:, n] - machines.xdp * i_d[:, n]
        e_dt[:, n] = ed[:, n] + machines.xqp * i_q[:, n]
        p_e[:, n] = _conv(e_qt, i_q, n) + _conv(e_dt, i_d, n)

        if n == 0:
            f_d = w[:, 0] - w_r
            f_w = half_h * (machines.pm - p_e[:, 0] - machines.D * (w[:, 0] - w_r) / w_r)
            f_eq = (machines.efd - eq[:, 0] - dx_d * i_d[:, 0]) / machines.Td0p
        else:
            f_d = w[:, n]
            f_w = half_h * (-p_e[:, n] - machines.D * w[:, n] / w_r)
            f_eq = (-eq[:, n] - dx_d * i_d[:, n]) / machines.Td0p
        f_ed = (-ed[:, n] + dx_q * i_q[:, n]) / machines.Tq0p

        inv = 1.0 / (n + 1)
        d[:, n + 1] = f_d * inv
        w[:, n + 1] = f_w * inv
        eq[:, n + 1] = f_eq * inv
        ed[:, n + 1] = f_ed * inv

    return np.concatenate([d, w, eq, ed], axis=0)


def derive_window(
    state0: np.ndarray,
    net: ReducedNetwork,
    machines: MachineSet,
    order: int = 2,
    t0: float = 0.0,
    length: float = 1e-3,
) -> SASWindow:
    """Build the series window for one propagation step."""
    coeffs = window_coefficients(state0, net, machines, order)
    return SASWindow(t0=t0, length=length, coeffs=coeffs, loads=dict(net.loads))


def evaluate_sas(window: SASWindow, t_local: float) -> np.ndarray:
    """Evaluate the window series at a local time in [0, length]."""
    if not (0.0 <= t_local <= window.length):
        raise ValueError(
            f"t_local {t_local} outside the window [0, {window.length}]"
        )
    return series_eval(window.coeffs, t_local)


def simulate_sas(
    case: SystemCase,
    scenario: Scenario,
    config: SolverConfig,
    path: NoisePath | None = None,
    setup: SimulationSetup | None = None,
    out_stride: int = 1,
) -> Trajectory:
    """Propagate one run with consecutive series windows of fixed length.

    Stage boundaries split the enclosing window exactly; stochastic loads
    are advanced and the network rebuilt at every resample boundary.  The
    output is sampled at the window length.
    """
    if setup is None:
        setup = SimulationSetup.build(case, scenario)
    machines = setup.machines
    order = config.order
    if config.resample_dt is not None and setup.specs:
        if abs(config.resample_dt - scenario.resample_dt) > 1e-12:
            raise ValueError("config resample_dt disagrees with the scenario")
    if config.window > scenario.resample_dt + 1e-12 and setup.specs:
        raise ValueError("window must not exceed the resample interval")

    def stepper(x, net, dt):
        coeffs = window_coefficients(x, net, machines, order)
        return series_eval(coeffs, dt)

    return run_simulation(
        setup,
        config.window,
        stepper,
        solver="sas",
        path=path,
        out_stride=out_stride,
        horizon=config.horizon,
    )

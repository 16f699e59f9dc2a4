"""Two-axis machine dynamics coupled through the reduced network.

The dynamic state vector packs, per generator k, the rotor angle delta_k
(rad), rotor speed omega_k (rad/s) and the transient voltages e'_qk and
e'_dk (p.u.), stored block-wise: [delta..., omega..., eqp..., edp...].
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .case import SystemCase
from .network import NetworkCondition, ReducedNetwork, build_reduced_network
from .powerflow import injected_power, solve_power_flow


class EquilibriumError(RuntimeError):
    """Newton search for an equilibrium failed; carries the final residual."""

    def __init__(self, msg: str, residual: float):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class MachineSet:
    """Per-generator constants of the simulated system, as flat arrays.

    ``efd`` and ``pm`` (field voltage and mechanical power) are fixed inputs
    determined by the pre-fault equilibrium and held constant throughout a
    simulation.
    """

    bus: np.ndarray
    H: np.ndarray
    D: np.ndarray
    xd: np.ndarray
    xdp: np.ndarray
    xq: np.ndarray
    xqp: np.ndarray
    Td0p: np.ndarray
    Tq0p: np.ndarray
    Rs: np.ndarray
    omega_r: float
    efd: np.ndarray | None = None
    pm: np.ndarray | None = None

    @classmethod
    def from_case(cls, case: SystemCase) -> "MachineSet":
        g = case.generators
        arr = lambda f: np.array([getattr(p, f) for p in g], dtype=float)
        return cls(
            bus=np.array([p.bus for p in g], dtype=int),
            H=arr("H"),
            D=arr("D"),
            xd=arr("xd"),
            xdp=arr("xdp"),
            xq=arr("xq"),
            xqp=arr("xqp"),
            Td0p=arr("Td0p"),
            Tq0p=arr("Tq0p"),
            Rs=arr("Rs"),
            omega_r=g[0].omega_r,
        )

    @property
    def n_gen(self) -> int:
        return len(self.H)

    def with_inputs(self, efd: np.ndarray, pm: np.ndarray) -> "MachineSet":
        return replace(self, efd=efd, pm=pm)


def pack_state(delta, omega, eqp, edp) -> np.ndarray:
    return np.concatenate([delta, omega, eqp, edp])


def split_state(state: np.ndarray):
    k = state.shape[0] // 4
    return state[:k], state[k : 2 * k], state[2 * k : 3 * k], state[3 * k :]


@dataclass(frozen=True)
class AlgebraicOutputs:
    """Network coupling quantities per generator (all p.u.)."""

    emf: np.ndarray  # complex internal EMF
    i_r: np.ndarray
    i_i: np.ndarray
    i_d: np.ndarray
    i_q: np.ndarray
    e_d: np.ndarray
    e_q: np.ndarray
    p_e: np.ndarray


def compute_injections(
    state: np.ndarray, net: ReducedNetwork, machines: MachineSet
) -> AlgebraicOutputs:
    """Evaluate the algebraic network coupling at a dynamic state.

    EMF from (e'_d, e'_q, delta); terminal currents I = Y E; dq currents by
    rotation; stator voltages e_q = e'_q - x'_d i_d and e_d = e'_d + x'_q i_q;
    electric power P_e = e_q i_q + e_d i_d.
    """
    delta, _, eqp, edp = split_state(state)
    sin_d, cos_d = np.sin(delta), np.cos(delta)
    emf = (edp * sin_d + eqp * cos_d) + 1j * (eqp * sin_d - edp * cos_d)
    it = net.y @ emf
    i_r, i_i = it.real, it.imag
    i_q = i_i * sin_d + i_r * cos_d
    i_d = i_r * sin_d - i_i * cos_d
    e_q = eqp - machines.xdp * i_d
    e_d = edp + machines.xqp * i_q
    p_e = e_q * i_q + e_d * i_d
    return AlgebraicOutputs(emf, i_r, i_i, i_d, i_q, e_d, e_q, p_e)


def rhs(state: np.ndarray, net: ReducedNetwork, machines: MachineSet) -> np.ndarray:
    """Time derivative of the packed dynamic state."""
    delta, omega, eqp, edp = split_state(state)
    out = compute_injections(state, net, machines)
    w_r = machines.omega_r
    d_delta = omega - w_r
    d_omega = (w_r / (2.0 * machines.H)) * (
        machines.pm - out.p_e - machines.D * (omega - w_r) / w_r
    )
    d_eqp = (machines.efd - eqp - (machines.xd - machines.xdp) * out.i_d) / machines.Td0p
    d_edp = (-edp + (machines.xq - machines.xqp) * out.i_q) / machines.Tq0p
    return pack_state(d_delta, d_omega, d_eqp, d_edp)


@dataclass(frozen=True)
class InitResult:
    state: np.ndarray
    efd: np.ndarray
    pm: np.ndarray
    machines: MachineSet  # with efd/pm filled in


def init_dynamic_state(
    case: SystemCase,
    profile: np.ndarray,
    net: ReducedNetwork | None = None,
) -> InitResult:
    """Initialize machine states at the pre-fault operating point.

    The rotor angle is placed so the d-axis transient-voltage equation is at
    equilibrium, the transient voltages follow from network consistency with
    the solved terminal conditions, and E_fd / P_m are back-computed so every
    right-hand side of the dynamic model vanishes at the returned state
    (residual below 1e-9 against the pre-fault reduced network at mean loads).
    """
    machines = MachineSet.from_case(case)
    s_net = injected_power(case, profile)

    delta = np.empty(machines.n_gen)
    eqp = np.empty(machines.n_gen)
    edp = np.empty(machines.n_gen)
    for g_idx, gen in enumerate(case.generators):
        i = case.bus_index(gen.bus)
        v = profile[i]
        s_gen = s_net[i]
        ld = case.load_at(gen.bus)
        if ld is not None:
            s_gen = s_gen + (ld.p + 1j * ld.q)
        cur = np.conj(s_gen / v)
        # rotor position from the quadrature-axis voltage behind (Rs, xq - xqp + xdp)
        x_qq = gen.xq - gen.xqp + gen.xdp
        delta[g_idx] = np.angle(v + (gen.Rs + 1j * x_qq) * cur)
        rot = np.exp(-1j * (delta[g_idx] - np.pi / 2.0))
        vd, vq = (v * rot).real, (v * rot).imag
        idd, iqq = (cur * rot).real, (cur * rot).imag
        eqp[g_idx] = vq + gen.Rs * iqq + gen.xdp * idd
        edp[g_idx] = vd + gen.Rs * idd - gen.xdp * iqq

    omega = np.full(machines.n_gen, machines.omega_r)
    state = pack_state(delta, omega, eqp, edp)

    if net is None:
        loads = {ld.bus: (ld.p, ld.q) for ld in case.loads}
        net = build_reduced_network(case, NetworkCondition("pre-fault"), loads, profile)
    out = compute_injections(state, net, machines)
    efd = eqp + (machines.xd - machines.xdp) * out.i_d
    pm = out.p_e.copy()
    return InitResult(state, efd, pm, machines.with_inputs(efd, pm))


def solve_equilibrium(
    case: SystemCase,
    condition: NetworkCondition,
    loads: dict[int, tuple[float, float]],
    tol: float = 1e-9,
    max_iter: int = 50,
) -> np.ndarray:
    """Find the equilibrium of the dynamic model under a network condition.

    Damped Newton iteration started from the pre-fault initialized state,
    with E_fd and P_m held at their pre-fault values.  Raises
    :class:`EquilibriumError` when no nearby equilibrium exists (which is how
    a post-fault network with no stable operating point shows up).
    """
    profile = solve_power_flow(case)
    init = init_dynamic_state(case, profile)
    machines = init.machines
    net = build_reduced_network(case, condition, loads, profile)

    x = init.state.copy()
    scale = np.maximum(np.abs(x), 1.0)
    res = rhs(x, net, machines)
    norm = np.max(np.abs(res))
    for _ in range(max_iter):
        if norm < tol:
            return x
        jac = _rhs_jacobian(x, net, machines, scale)
        # least-squares step: the Jacobian is singular along the uniform
        # rotation of all rotor angles, which leaves the dynamics invariant
        step = np.linalg.lstsq(jac, -res, rcond=None)[0]
        # backtracking damping on the residual norm
        lam = 1.0
        for _ in range(30):
            x_new = x + lam * step
            res_new = rhs(x_new, net, machines)
            norm_new = np.max(np.abs(res_new))
            if norm_new < norm:
                break
            lam *= 0.5
        else:
            raise EquilibriumError(
                f"equilibrium search stalled at residual {norm:.3e}", residual=norm
            )
        x, res, norm = x_new, res_new, norm_new
    if norm < tol:
        return x
    raise EquilibriumError(
        f"no equilibrium found in {max_iter} iterations (residual {norm:.3e})",
        residual=norm,
    )


def _rhs_jacobian(x, net, machines, scale, rel_step: float = 1e-7) -> np.ndarray:
    n = x.shape[0]
    jac = np.empty((n, n))
    for j in range(n):
        h = rel_step * scale[j]
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (rhs(xp, net, machines) - rhs(xm, net, machines)) / (2.0 * h)
    return jac

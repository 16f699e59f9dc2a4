import math

import numpy as np
import pytest

from stochsim.em import EMConfig, em_sde_step, euler_det_step, simulate_em
from stochsim.noise import OUParams, build_noise_path
from stochsim.sas import SolverConfig, simulate_sas
from stochsim.scenario import Scenario, SimulationSetup
from stochsim import smib as sm


def test_em_sde_step_deterministic():
    assert em_sde_step(1.0, OUParams(0.5, 0.0), 1e-3, 0.0) == pytest.approx(0.9995)


def test_em_sde_step_pure_noise():
    p = OUParams(3.0, 0.7)
    assert em_sde_step(0.0, p, 0.01, 0.25) == pytest.approx(0.7 * 0.25)


def test_em_sde_step_stationary_variance():
    # Euler sampling carries an O(dt) bias; at dt = 1e-3 it stays within 2%
    p = OUParams(0.5, 1.0)
    rng = np.random.default_rng(42)
    dt = 1e-3
    n = 1_000_000
    dw = rng.standard_normal(n) * math.sqrt(dt)
    eps = 0.0
    # subsample every 2000 steps (about one correlation time) for the estimate
    keep = np.empty(n // 2000)
    for i in range(n):
        eps = eps - p.a * eps * dt + p.b * dw[i]
        if i % 2000 == 1999:
            keep[i // 2000] = eps
    assert np.var(keep) == pytest.approx(1.0, rel=0.02)


def test_euler_det_step_scalar_decay():
    # packaged form of x' = -x via a single-machine zero-coupling system is
    # overkill; the scalar contract is the arithmetic itself
    state = np.array([1.0])

    class Net:
        pass

    # use the public helper directly on the dynamics rhs contract
    from stochsim.dynamics import MachineSet, pack_state
    from stochsim.network import ReducedNetwork

    net = ReducedNetwork(
        y=np.zeros((1, 1), dtype=complex),
        recovery=np.zeros((0, 1), dtype=complex),
        gen_buses=(1,),
        bus_ids=(1,),
        stage="pre-fault",
    )
    m = MachineSet(
        bus=np.array([1]), H=np.array([1.0]), D=np.array([0.0]),
        xd=np.array([0.3]), xdp=np.array([0.3]),
        xq=np.array([0.3]), xqp=np.array([0.3]),
        Td0p=np.array([1.0]), Tq0p=np.array([1.0]), Rs=np.array([0.0]),
        omega_r=1.0, efd=np.array([0.0]), pm=np.array([0.0]),
    )
    # e'_q decays as de'_q/dt = (efd - e'_q)/Td0p = -e'_q here
    x = pack_state([0.0], [1.0], [1.0], [0.0])
    out = euler_det_step(x, net, m, 0.1)
    assert out[2] == pytest.approx(0.9)


def test_euler_step_matches_smib_hand_update():
    p = sm.SMIBParams()
    net, machines = sm.smib_embedding(p)
    d0, w0 = 0.8, p.omega_r + 1.2
    state = sm.smib_state(p, d0, w0)
    dt = 1e-3
    out = euler_det_step(state, net, machines, dt)
    dd, dw = sm.smib_rhs(p, d0, w0)
    assert out[0] == pytest.approx(d0 + dt * dd, rel=1e-12)
    assert out[2] == pytest.approx(w0 + dt * dw, rel=1e-10)


def test_em_equilibrium_preserved(smib_case):
    sc = Scenario(horizon_s=2.0)
    setup = SimulationSetup.build(smib_case, sc)
    tr = simulate_em(smib_case, sc, EMConfig(), setup=setup)
    assert np.max(np.abs(tr.states - setup.x0)) < 1e-7


def test_em_determinism_same_seed(smib_case):
    import dataclasses

    sc = Scenario(horizon_s=1.0, stochastic_buses=(1,), sigma_rel=0.02)
    setup = SimulationSetup.build(smib_case, sc)
    path = build_noise_path((9, 0), setup.n_noise_vars(), 1.0, sc.resample_dt)
    tr1 = simulate_em(smib_case, sc, EMConfig(), path, setup=setup)
    tr2 = simulate_em(smib_case, sc, EMConfig(), path, setup=setup)
    assert np.array_equal(tr1.states, tr2.states)


def test_em_first_order_richardson(smib_case):
    # deterministic fault run: halving dt halves the error vs a tight reference
    sc = Scenario(
        horizon_s=1.5, fault_bus=1, fault_start_s=0.2, fault_duration_cycles=3
    )
    setup = SimulationSetup.build(smib_case, sc)
    ref = simulate_em(smib_case, sc, EMConfig(dt=2e-5), setup=setup, out_stride=100)
    k = smib_case.n_gen
    errs = []
    for dt, stride in ((4e-3, 1), (2e-3, 2)):
        tr = simulate_em(smib_case, sc, EMConfig(dt=dt), setup=setup, out_stride=stride)
        # compare on the common 4e-3 grid against the reference's 2e-3 grid
        coarse_ref = ref.states[:: 2, :k][: tr.states.shape[0]]
        errs.append(np.max(np.abs(tr.states[:, :k] - coarse_ref)))
    ratio = errs[0] / errs[1]
    assert ratio == pytest.approx(2.0, abs=0.3)


def test_em_shared_path_tracks_sas(smib_case):
    sc = Scenario(
        horizon_s=3.0,
        fault_bus=1,
        fault_start_s=0.25,
        fault_duration_cycles=3,
        stochastic_buses=(1,),
        sigma_rel=0.02,
    )
    setup = SimulationSetup.build(smib_case, sc)
    path = build_noise_path((5, 0), setup.n_noise_vars(), 3.0, sc.resample_dt)
    tr_s = simulate_sas(smib_case, sc, SolverConfig(), path, setup=setup)
    tr_e = simulate_em(smib_case, sc, EMConfig(dt=1e-3), path, setup=setup)
    k = smib_case.n_gen
    gap = np.max(np.abs(tr_s.states[:, :k] - tr_e.states[:, :k]))
    assert gap < 5e-3


def test_em_paper_sde_mode_runs(smib_case):
    sc = Scenario(horizon_s=0.5, stochastic_buses=(1,), sigma_rel=0.02)
    setup = SimulationSetup.build(smib_case, sc)
    cfg = EMConfig(dt=1e-3, mode="paper-sde")
    path = build_noise_path((1, 0), setup.n_noise_vars(), 0.5, cfg.dt)
    tr = simulate_em(smib_case, sc, cfg, path, setup=setup)
    assert not tr.diverged
    # loads move every step, so the state wanders off equilibrium slightly
    assert np.max(np.abs(tr.states - setup.x0)) > 0


def test_em_paper_sde_requires_matching_path(smib_case):
    sc = Scenario(horizon_s=0.5, stochastic_buses=(1,), sigma_rel=0.02)
    setup = SimulationSetup.build(smib_case, sc)
    cfg = EMConfig(dt=1e-3, mode="paper-sde")
    path = build_noise_path((1, 0), setup.n_noise_vars(), 0.5, 0.1)
    with pytest.raises(ValueError):
        simulate_em(smib_case, sc, cfg, path, setup=setup)


def test_em_config_validation():
    with pytest.raises(ValueError):
        EMConfig(dt=0.0)
    with pytest.raises(ValueError):
        EMConfig(mode="heun")

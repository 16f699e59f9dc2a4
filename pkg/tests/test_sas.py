import math

import numpy as np
import pytest

from stochsim.sas import (
    SASWindow,
    SolverConfig,
    derive_window,
    evaluate_sas,
    simulate_sas,
    taylor_window,
    window_coefficients,
)
from stochsim.scenario import SimulationSetup, load_scenario, Scenario
from stochsim.series import series_mul
from stochsim import smib as sm


def decay_rhs(a):
    # series form of xdot = -a x
    def f(c):
        return -a * c

    return f


def test_taylor_window_exponential_series():
    a, x0, order = 0.7, 2.0, 5
    c = taylor_window(decay_rhs(a), x0, order)
    expected = [x0 * (-a) ** n / math.factorial(n) for n in range(order + 1)]
    assert np.allclose(c[0], expected, rtol=1e-13)


def test_taylor_window_coupled_oscillator():
    # xdot = y, ydot = -x from (1, 0): cosine and negative sine series
    def f(c):
        return np.array([c[1], -c[0]])

    c = taylor_window(f, [1.0, 0.0], 6)
    assert np.allclose(c[0], [1, 0, -0.5, 0, 1 / 24, 0, -1 / 720], atol=1e-14)
    assert np.allclose(c[1], [0, -1, 0, 1 / 6, 0, -1 / 120, 0], atol=1e-14)


def test_taylor_window_nonlinear_product():
    # xdot = x^2 from x0: geometric series x0^(n+1)
    def f(c):
        return series_mul(c[0], c[0], order=c.shape[1] - 1)[None, :]

    x0 = 0.5
    c = taylor_window(f, [x0], 4)
    assert np.allclose(c[0], [x0**(n + 1) for n in range(5)], rtol=1e-13)


def test_evaluate_sas_endpoints_and_range():
    w = SASWindow(t0=0.0, length=1e-3, coeffs=np.array([[1.0, -1.0, 0.5]]))
    assert evaluate_sas(w, 0.0) == pytest.approx(1.0)
    assert evaluate_sas(w, 1e-3) == pytest.approx(1.0 - 1e-3 + 5e-7)
    with pytest.raises(ValueError):
        evaluate_sas(w, 2e-3)
    with pytest.raises(ValueError):
        evaluate_sas(w, -1e-6)


def test_constant_series_static_state():
    w = SASWindow(t0=0.0, length=0.5, coeffs=np.array([[2.0, 0.0, 0.0]]))
    for t in (0.0, 0.1, 0.5):
        assert evaluate_sas(w, t) == pytest.approx(2.0)


def test_local_error_order_scaling():
    # one window of xdot = -x: error vs exp(-h) scales as h^(N+1)
    for order in (1, 2, 3):
        errs = []
        for h in (0.2, 0.1):
            c = taylor_window(decay_rhs(1.0), 1.0, order)
            approx = float(np.polyval(c[0][::-1], h))
            errs.append(abs(approx - math.exp(-h)))
        measured = math.log2(errs[0] / errs[1])
        assert measured == pytest.approx(order + 1, abs=0.3)


def test_derive_window_matches_oracle():
    p = sm.SMIBParams()
    net, machines = sm.smib_embedding(p)
    w = derive_window(sm.smib_state(p, 0.7, p.omega_r + 1.0), net, machines, order=2)
    d_hand, w_hand = sm.smib_window_coefficients(p, 0.7, p.omega_r + 1.0)
    assert np.allclose(w.coeffs[0], d_hand, rtol=1e-10)
    assert np.allclose(w.coeffs[2], w_hand, rtol=1e-10)
    assert w.order == 2


def test_window_evaluation_restores_initial_state():
    p = sm.SMIBParams()
    net, machines = sm.smib_embedding(p)
    state = sm.smib_state(p, 0.3, p.omega_r - 0.5)
    w = derive_window(state, net, machines, order=2)
    assert np.allclose(evaluate_sas(w, 0.0), state, atol=0)


def test_simulate_equilibrium_preserved(smib_case):
    sc = Scenario(horizon_s=2.0, name="hold")
    setup = SimulationSetup.build(smib_case, sc)
    tr = simulate_sas(smib_case, sc, SolverConfig(), setup=setup)
    assert not tr.diverged
    drift = np.max(np.abs(tr.states - setup.x0))
    assert drift < 1e-7


def test_simulate_deterministic_repeatability(smib_case):
    sc = Scenario(
        horizon_s=1.0, fault_bus=1, fault_start_s=0.2, fault_duration_cycles=3
    )
    setup = SimulationSetup.build(smib_case, sc)
    tr1 = simulate_sas(smib_case, sc, SolverConfig(), setup=setup)
    tr2 = simulate_sas(smib_case, sc, SolverConfig(), setup=setup)
    assert np.array_equal(tr1.states, tr2.states)


def test_simulate_stochastic_repeatability(smib_case, repo_root):
    import dataclasses

    from stochsim.noise import build_noise_path

    sc = dataclasses.replace(
        load_scenario(repo_root / "scenarios" / "none.json"),
        horizon_s=1.0,
        stochastic_buses=(1,),
        sigma_rel=0.02,
    )
    setup = SimulationSetup.build(smib_case, sc)
    path = build_noise_path((3, 0), setup.n_noise_vars(), 1.0, sc.resample_dt)
    tr1 = simulate_sas(smib_case, sc, SolverConfig(), path, setup=setup)
    tr2 = simulate_sas(smib_case, sc, SolverConfig(), path, setup=setup)
    assert np.array_equal(tr1.states, tr2.states)
    assert tr1.states[1000, 0] != setup.x0[0]  # noise actually acted


def test_simulate_converges_to_reference_on_fault(smib_case):
    # shrinking-window exactness: h = 1e-3 tracks a fine RK4 reference
    sc = Scenario(
        horizon_s=2.0, fault_bus=1, fault_start_s=0.25, fault_duration_cycles=6
    )
    setup = SimulationSetup.build(smib_case, sc)
    tr = simulate_sas(smib_case, sc, SolverConfig(), setup=setup)

    # independent reference: classic fixed-step RK4 on the same staged system
    from stochsim.dynamics import rhs

    h = 1e-4
    n = round(sc.horizon_s / h)
    t_fault, t_clear = sc.fault_times(smib_case)
    nets = {
        "pre-fault": setup.build_net("pre-fault", setup.mean_loads),
        "fault-on": setup.build_net("fault-on", setup.mean_loads),
        "post-fault": setup.build_net("post-fault", setup.mean_loads),
    }
    x = setup.x0.copy()
    ref = [x.copy()]
    for i in range(n):
        t = i * h
        stage = (
            "pre-fault"
            if t < t_fault - 1e-12
            else ("fault-on" if t < t_clear - 1e-12 else "post-fault")
        )
        net = nets[stage]
        k1 = rhs(x, net, setup.machines)
        k2 = rhs(x + 0.5 * h * k1, net, setup.machines)
        k3 = rhs(x + 0.5 * h * k2, net, setup.machines)
        k4 = rhs(x + h * k3, net, setup.machines)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ref.append(x.copy())
    ref = np.array(ref)
    # compare rotor angles on the coarse grid; the reference's stage
    # boundaries are aligned to its own fine grid, giving O(h_ref) offsets
    k = smib_case.n_gen
    coarse = ref[::10, :k]
    err = np.max(np.abs(tr.states[:, :k] - coarse))
    assert err < 1e-3


def test_window_must_not_exceed_resample(smib_case):
    sc = Scenario(horizon_s=1.0, stochastic_buses=(1,), sigma_rel=0.01, resample_dt=0.1)
    setup = SimulationSetup.build(smib_case, sc)
    from stochsim.noise import build_noise_path

    path = build_noise_path(0, 2, 1.0, 0.1)
    with pytest.raises(ValueError):
        simulate_sas(smib_case, sc, SolverConfig(window=0.2), path, setup=setup)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(order=0)
    with pytest.raises(ValueError):
        SolverConfig(window=0.0)

import numpy as np
import pytest

from stochsim.network import (
    NetworkCondition,
    ReductionError,
    assemble_bus_matrix,
    build_reduced_network,
    kron_reduce,
    load_to_admittance,
)
from stochsim.powerflow import solve_power_flow
from stochsim import smib as sm


def test_load_to_admittance_unit_values():
    assert load_to_admittance(1.0, 0.0, 1.0 + 0j) == pytest.approx(1.0 + 0j)
    assert load_to_admittance(0.0, 0.0, 0.7 + 0.2j) == 0.0
    assert load_to_admittance(1.0, 0.5, 2.0 + 0j) == pytest.approx(0.25 - 0.125j)


def test_load_to_admittance_zero_voltage():
    with pytest.raises(ValueError):
        load_to_admittance(1.0, 0.0, 0.0)


def test_kron_noop_when_nothing_to_eliminate():
    y = np.array([[1.0 - 2j, -1.0 + 2j], [-1.0 + 2j, 1.0 - 2j]])
    y_red, rec = kron_reduce(y, np.array([0, 1]))
    assert np.array_equal(y_red, y)
    assert rec.shape == (0, 2)


def test_kron_three_node_chain_hand_computed():
    # chain 1-2-3 with a shunt at node 2; eliminating node 2 by hand:
    # Yred_11 = y12 - y12^2/S, Yred_13 = -y12*y23/S, S = y12+y23+ysh
    y12 = 2.0 - 1.0j
    y23 = 1.0 - 3.0j
    ysh = 0.5 - 0.1j
    s = y12 + y23 + ysh
    y = np.array(
        [
            [y12, -y12, 0],
            [-y12, s, -y23],
            [0, -y23, y23],
        ]
    )
    y_red, rec = kron_reduce(y, np.array([0, 2]))
    assert y_red[0, 0] == pytest.approx(y12 - y12**2 / s, rel=1e-14)
    assert y_red[0, 1] == pytest.approx(-y12 * y23 / s, rel=1e-14)
    assert y_red[1, 1] == pytest.approx(y23 - y23**2 / s, rel=1e-14)
    # recovery reproduces the interior voltage
    e = np.array([1.1 + 0.2j, 0.95 - 0.1j])
    v2 = rec @ e
    # interior KCL: y12 (V2 - E1) + y23 (V2 - E3) + ysh V2 = 0
    residual = y12 * (v2[0] - e[0]) + y23 * (v2[0] - e[1]) + ysh * v2[0]
    assert abs(residual) < 1e-12


def test_kron_exactness_on_random_networks():
    # currents from the reduced matrix must equal a dense solve of the full
    # network with zero interior injections
    rng = np.random.default_rng(7)
    for _ in range(20):
        n_keep, n_elim = 2, rng.integers(1, 4)
        n = n_keep + n_elim
        y = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.8:
                    yb = rng.uniform(0.5, 3.0) - 1j * rng.uniform(0.5, 8.0)
                    y[i, j] -= yb
                    y[j, i] -= yb
                    y[i, i] += yb
                    y[j, j] += yb
        for i in range(n):
            y[i, i] += rng.uniform(0.05, 0.3) - 1j * rng.uniform(-0.1, 0.1)
        keep = np.arange(n_keep)
        y_red, _ = kron_reduce(y, keep)
        assert np.allclose(y_red, y_red.T, atol=1e-13)  # symmetry preserved

        e = rng.standard_normal(n_keep) + 1j * rng.standard_normal(n_keep)
        elim = np.arange(n_keep, n)
        v_int = np.linalg.solve(y[np.ix_(elim, elim)], -y[np.ix_(elim, keep)] @ e)
        i_full = y[np.ix_(keep, keep)] @ e + y[np.ix_(keep, elim)] @ v_int
        assert np.allclose(y_red @ e, i_full, atol=1e-10)


def test_kron_singular_interior_raises():
    y = np.zeros((2, 2), dtype=complex)  # isolated interior node
    y[0, 0] = 1.0
    with pytest.raises(ReductionError):
        kron_reduce(y, np.array([0]))


def test_fault_stage_grounds_bus(smib_case):
    v = solve_power_flow(smib_case)
    loads = {ld.bus: (ld.p, ld.q) for ld in smib_case.loads}
    cond = NetworkCondition("fault-on", fault_bus=1)
    net = build_reduced_network(smib_case, cond, loads, v)
    e = np.array([1.1 * np.exp(0.3j), 1.0 + 0j])
    vb = net.bus_voltages(e)
    assert abs(vb[0]) < 1e-5  # faulted bus held at (near) zero


def test_reduced_matrix_symmetric(ieee39_case):
    v = solve_power_flow(ieee39_case)
    loads = {ld.bus: (ld.p, ld.q) for ld in ieee39_case.loads}
    net = build_reduced_network(
        ieee39_case, NetworkCondition("pre-fault"), loads, v
    )
    assert np.allclose(net.y, net.y.T, atol=1e-12)
    assert net.y.shape == (10, 10)


def test_post_fault_removes_branch(ieee39_case):
    pre = assemble_bus_matrix(ieee39_case, NetworkCondition("pre-fault"))
    post = assemble_bus_matrix(
        ieee39_case,
        NetworkCondition("post-fault", removed_branches=((3, 4),)),
    )
    i, j = ieee39_case.bus_index(3), ieee39_case.bus_index(4)
    assert pre[i, j] != 0
    assert post[i, j] == 0


def test_smib_reduction_matches_k_algebra():
    # the Fig-2 circuit: reduced self/transfer admittances are tied to the
    # hand k-coefficients by k3 = E'^2 G11, k4/(k1 k2) = G12, k5/(k1 k2) = B12
    p = sm.SMIBParams(rs=0.01, xdp=0.3, r=0.02, x=0.4, rl=2.0, xl=1.0, ep=1.1)
    net, _ = sm.smib_embedding(p)
    k1, k2, k3, k4, k5 = sm.k_coefficients(p)
    assert k3 == pytest.approx(p.ep**2 * net.y[0, 0].real, rel=1e-12)
    assert k4 / (k1 * k2) == pytest.approx(net.y[0, 1].real, rel=1e-12)
    assert k5 / (k1 * k2) == pytest.approx(net.y[0, 1].imag, rel=1e-12)


def test_condition_validation():
    with pytest.raises(ValueError):
        NetworkCondition("fault-on")  # fault bus missing
    with pytest.raises(ValueError):
        NetworkCondition("mid-fault")
    with pytest.raises(ValueError):
        NetworkCondition("pre-fault", removed_branches=((1, 2),))

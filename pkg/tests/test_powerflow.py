import json
import math

import numpy as np
import pytest

from stochsim.case import parse_case
from stochsim.powerflow import (
    PowerFlowError,
    injected_power,
    scheduled_injections,
    solve_power_flow,
)


def two_bus_case(r, x, p_load, q_load):
    doc = {
        "system": {"frequency_hz": 60.0, "base_mva": 100.0},
        "buses": [
            {"id": 1, "type": "slack", "v_setpoint": 1.0},
            {"id": 2, "type": "PQ"},
        ],
        "branches": [{"from": 1, "to": 2, "r": r, "x": x}],
        "generators": [
            {"bus": 1, "H": 4.0, "D": 1.0, "xd": 1.0, "xdp": 0.3,
             "xq": 0.8, "xqp": 0.3, "Td0p": 6.0, "Tq0p": 1.0}
        ],
        "loads": [{"bus": 2, "P": p_load, "Q": q_load}],
    }
    return parse_case(json.dumps(doc))


def test_single_bus_trivial():
    doc = {
        "system": {"frequency_hz": 60.0, "base_mva": 100.0},
        "buses": [{"id": 1, "type": "slack", "v_setpoint": 1.03}],
        "branches": [],
        "generators": [
            {"bus": 1, "H": 4.0, "D": 1.0, "xd": 1.0, "xdp": 0.3,
             "xq": 0.8, "xqp": 0.3, "Td0p": 6.0, "Tq0p": 1.0}
        ],
        "loads": [],
    }
    # a bus with no branches makes the Jacobian empty; the flat start is the answer
    case = parse_case(json.dumps(doc))
    v = solve_power_flow(case)
    assert v[0] == pytest.approx(1.03)


def test_two_bus_against_closed_form():
    # independent oracle: with slack V1 = 1+0j and a PQ load (P, Q) behind
    # z = r+jx, writing W = V2 gives |W|^2 - W = -(P+jQ) conj(z), so
    # Im(W) = Q r - P x and Re(W) solves a quadratic.
    r, x, p, q = 0.02, 0.2, 0.5, 0.2
    b = q * r - p * x
    a = 0.5 * (1.0 + math.sqrt(1.0 - 4.0 * (b * b + p * r + q * x)))
    expected = a + 1j * b

    case = two_bus_case(r, x, p, q)
    v = solve_power_flow(case)
    assert v[1] == pytest.approx(expected, abs=1e-9)


def test_two_bus_heavy_load_diverges():
    case = two_bus_case(0.0, 0.5, 3.0, 1.0)  # far beyond the transfer limit
    with pytest.raises(PowerFlowError) as err:
        solve_power_flow(case)
    assert err.value.mismatch > 0


def test_ieee39_converges_and_is_self_consistent(ieee39_case):
    v = solve_power_flow(ieee39_case)
    s = injected_power(ieee39_case, v)
    sched = scheduled_injections(ieee39_case)
    types = [b.type for b in ieee39_case.buses]
    for i, btype in enumerate(types):
        if btype == "PQ":
            assert abs(s[i] - sched[i]) < 1e-6
        elif btype == "PV":
            assert abs(s[i].real - sched[i].real) < 1e-6
            assert abs(v[i]) == pytest.approx(ieee39_case.buses[i].v_setpoint, abs=1e-9)
    # voltage profile sane
    assert np.all(np.abs(v) > 0.9) and np.all(np.abs(v) < 1.1)

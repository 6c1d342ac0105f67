import numpy as np
import pytest

from conftest import closed_loop
from gfmnet.errors import ModelError
from gfmnet.simulate import (
    LoadStep,
    balanced_load,
    correlation_study,
    delta_ac_load,
    simulate,
    steady_state,
    steady_trajectory,
    unbalance_factors,
)


def test_delta_load_split():
    ld = delta_ac_load("5", 0.6)
    assert ld.dP == pytest.approx((0.3, 0.0, 0.3))
    assert ld.dQ[0] == pytest.approx(-ld.dQ[2])
    assert ld.dQ[0] == pytest.approx(0.6 / (2 * np.sqrt(3)))


def test_load_step_validation():
    with pytest.raises(ModelError):
        LoadStep("1", (0.1, 0.1), (0.0,))
    with pytest.raises(ModelError):
        LoadStep("1", (float("nan"),), (0.0,))


def test_zero_input_stays_at_rest(docs):
    cl = closed_loop(docs["radial_ygd"])
    traj = simulate(cl, None, (), 0.5, 1e-2)
    assert np.abs(traj.x).max() == 0.0


def test_load_switches_on_at_t_start(docs):
    doc = docs["radial_ygd"]
    cl = closed_loop(doc)
    traj = simulate(cl, None, doc.loads, 1.0, 1e-2)
    before = traj.t < doc.loads[0].t_start - 1e-12
    assert np.abs(traj.x[before]).max() == 0.0
    assert np.abs(traj.x[-1]).max() > 0.0


def test_backends_agree(docs):
    doc = docs["feeder_single"]
    cl = closed_loop(doc)
    a = simulate(cl, None, doc.loads, 1.0, 1e-3, backend="numpy")
    b = simulate(cl, None, doc.loads, 1.0, 1e-3, backend="numba")
    np.testing.assert_allclose(a.x, b.x, atol=1e-12)


def test_steady_state_matches_long_run(docs):
    doc = docs["feeder_single"]
    cl = closed_loop(doc)
    loads = [balanced_load("671", 0.3)]
    ss = steady_state(cl, loads)
    traj = simulate(cl, None, loads, 200.0, 0.5)
    assert np.allclose(traj.omega[-1], ss.omega_common, atol=1e-8)
    st = steady_trajectory(cl, loads, ss)
    assert st.omega.shape[1] == traj.omega.shape[1]


def test_balanced_load_gives_no_unbalance(docs):
    doc = docs["radial_ygd"]
    cl = closed_loop(doc)
    traj = simulate(cl, None, [balanced_load("5", 0.3)], 0.5, 1e-2)
    rep = unbalance_factors(traj, "1")
    assert np.nanmax(rep.V_UF) < 1e-12
    assert rep.V_UF_N.max() < 1e-12


def test_unbalance_needs_three_phase_bus(docs):
    doc = docs["feeder_single"]
    traj = simulate(closed_loop(doc), None, (), 0.01, 1e-3)
    with pytest.raises(ModelError):
        unbalance_factors(traj, "645")


def test_columns_named(docs):
    doc = docs["radial_ygd"]
    traj = simulate(closed_loop(doc), None, doc.loads, 0.1, 1e-2)
    names, data = traj.columns()
    assert names[0] == "time"
    assert data.shape == (len(traj.t), len(names))
    assert "theta_1_a" in names and "omega_1_pos" in names


def test_correlation_zero_consistency():
    rows = [
        {"V_UF": 0.0, "V_UF_N": 0.0},
        {"V_UF": 0.01, "V_UF_N": 0.011},
        {"V_UF": 0.02, "V_UF_N": 0.019},
    ]
    res = correlation_study(rows)
    assert res.zero_consistent and res.coefficient > 0.99
    rows.append({"V_UF": 0.0, "V_UF_N": 0.5})
    assert not correlation_study(rows).zero_consistent

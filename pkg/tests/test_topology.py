import pytest

from gfmnet.errors import ModelError
from gfmnet.topology import (
    BranchSpec,
    NetworkModel,
    NodeSpec,
    check_no_1phi_bridge,
    check_path_consistency,
    is_connected,
    is_interior_exterior_connected,
    validate,
)


def _model(nodes, branches):
    return NetworkModel(
        tuple(NodeSpec(i, p, r) for i, p, r in nodes),
        tuple(BranchSpec(*b) for b in branches),
    )


def test_node_and_branch_validation():
    with pytest.raises(ModelError):
        NodeSpec("1", 2)
    with pytest.raises(ModelError):
        NodeSpec("1", 3, "boundary")
    with pytest.raises(ModelError):
        BranchSpec("1", "2", "Line3", 0.0)
    with pytest.raises(ValueError):
        BranchSpec("1", "2", "Nope", 1.0)


def test_duplicate_node_rejected():
    with pytest.raises(ModelError):
        _model([("1", 3, "exterior"), ("1", 3, "interior")], [])


def test_ygd_is_one_way(docs):
    good = is_interior_exterior_connected(docs["radial_ygd"].model)
    assert good.connected
    bad = is_interior_exterior_connected(docs["radial_reversed"].model)
    assert not bad.connected
    assert sorted(bad.violators) == ["4", "5"]


def test_path_consistency_reports_cycle(docs):
    res = check_path_consistency(docs["loop_shift"].model)
    assert not res.passed
    assert sorted(res.cycle) == ["1", "2", "3"]
    assert check_path_consistency(docs["two_radial"].model).passed


def test_disconnected_model():
    m = _model([("1", 3, "exterior"), ("2", 3, "exterior")], [])
    assert not is_connected(m)
    assert not validate(m).passed


def test_single_phase_bridge_detected():
    m = _model(
        [("1", 3, "exterior"), ("2", 3, "exterior"), ("s", 1, "interior")],
        [("s", "1", "Single", 1.0, "a"), ("s", "2", "Single", 1.0, "b")],
    )
    res = check_no_1phi_bridge(m)
    assert not res.passed
    assert res.path[0] in ("1", "2") and res.path[-1] in ("1", "2")


def test_validate_report_names(docs):
    rep = validate(docs["feeder_single"].model)
    assert rep.passed
    names = {c.name for c in rep.checks}
    assert {"connected", "interior_exterior_connected", "path_consistency"} <= names
    assert rep.as_dict()["passed"] is True

import dataclasses

import numpy as np
import pytest

from conftest import closed_loop, dd_variant
from gfmnet.controllers import ControllerSpec
from gfmnet.errors import ModelError, NonUniformDroop
from gfmnet.simulate import with_kbal
from gfmnet.stability import (
    certify,
    check_stability_conditions,
    h_matrix,
    h_power,
    nullspace,
)


def test_h_power_period():
    h = h_matrix()
    np.testing.assert_allclose(np.linalg.matrix_power(h, 7), h, atol=1e-12)
    np.testing.assert_allclose(h_power(0), np.eye(6))
    np.testing.assert_allclose(h_power(8), h_power(2), atol=1e-12)
    with pytest.raises(ValueError):
        h_power(-1)


def test_h_is_rank_deficient():
    # two eigenvalues of h are zero
    assert np.linalg.matrix_rank(h_matrix()) == 4


def test_reduced_and_full_closed_loop_agree(docs):
    cl = closed_loop(docs["feeder_single"])
    full = np.linalg.eigvals(cl.J_cl)
    red = np.linalg.eigvalsh(cl.J_cl_red)
    # one shared zero mode; J_cl carries the opposite sign to the dynamics
    for spec, sign in ((full, 1.0), (red, -1.0)):
        small = np.abs(spec) < 1e-9 * np.abs(spec).max()
        assert small.sum() == 1
        assert np.all(sign * spec[~small].real > 0)


def test_balanced_direction_is_null(docs):
    for name in ("radial_ygd", "two_radial", "feeder_multi"):
        cl = closed_loop(docs[name])
        xi = cl.layout.balanced()
        assert np.linalg.norm(cl.J_cl_red @ xi) < 1e-9


@pytest.mark.parametrize(
    "name, condition",
    [("radial_ygd", 1), ("two_radial", 3), ("feeder_single", 1), ("feeder_multi", 3)],
)
def test_shipped_examples_are_stable(docs, name, condition):
    doc = docs[name]
    cert = certify(doc.model, with_kbal(doc.converters, 0.0))
    assert cert.verdict == "stable"
    assert cert.fired_condition == condition
    assert cert.nullspace_dim == 1
    assert cert.balanced_subspace_check


def test_balancing_gain_fires_condition_two(docs):
    doc = docs["feeder_multi"]
    cert = certify(doc.model, with_kbal(doc.converters, 30.0))
    assert (cert.verdict, cert.fired_condition) == ("stable", 2)


def test_chain_without_balancing_is_unstable(docs):
    doc = docs["chain_ygd"]
    cert = certify(doc.model, with_kbal(doc.converters, 0.0))
    assert cert.verdict == "unstable-structure"
    assert cert.nullspace_dim == 3


def test_dd_join_without_condition(docs):
    doc = docs["two_radial"]
    res = check_stability_conditions(dd_variant(doc), doc.converters)
    assert res.fired is None
    nd = nullspace(closed_loop(doc, model=dd_variant(doc)))
    assert nd.dim == 3


def test_heterogeneous_droop_rejected_by_default(docs):
    doc = docs["two_radial"]
    specs = list(doc.converters)
    specs[0] = dataclasses.replace(specs[0], m_d=0.1)
    with pytest.raises(NonUniformDroop):
        certify(doc.model, specs)
    cert = certify(doc.model, specs, allow_heterogeneous=True)
    assert cert.verdict in ("indeterminate", "unstable-structure")
    assert any("heterogeneous" in n for n in cert.notes)


def test_certificate_serializes(docs):
    doc = docs["radial_ygd"]
    d = certify(doc.model, doc.converters).as_dict()
    assert d["verdict"] == "stable"
    assert len(d["smallest_eigenvalues"]) <= 10

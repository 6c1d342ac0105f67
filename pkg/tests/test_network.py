import numpy as np
import pytest

from gfmnet.errors import RankDeficientInterior, ValidationFailed
from gfmnet.network import assemble, kron_reduce, partition, recover_interior


def test_assembled_matrix_properties(docs):
    sys = assemble(docs["feeder_single"].model)
    J = sys.J
    np.testing.assert_allclose(J, J.T, atol=1e-12)
    assert np.linalg.eigvalsh(J).min() > -1e-10
    assert np.linalg.norm(J @ sys.balanced()) < 1e-10
    np.testing.assert_allclose(sys.B @ sys.W @ sys.B.T, J, atol=1e-12)


def test_partition_covers_all_coordinates(docs):
    sys = assemble(docs["radial_ygd"].model)
    J_ext, J_c, J_int = partition(sys)
    assert J_ext.shape[0] + J_int.shape[0] == sys.J.shape[0]
    assert J_c.shape == (J_ext.shape[0], J_int.shape[0])
    assert sorted(np.concatenate([sys.ext_idx, sys.int_idx])) == list(range(sys.J.shape[0]))


def test_invalid_model_refuses_assembly(docs):
    with pytest.raises(ValidationFailed):
        assemble(docs["radial_reversed"].model)


def test_rank_deficiency_when_forced(docs):
    with pytest.raises(RankDeficientInterior) as info:
        kron_reduce(assemble(docs["radial_reversed"].model, check=False))
    assert info.value.ratio < 1e-8


def test_kron_reduction_is_schur_complement(docs):
    red = kron_reduce(assemble(docs["two_radial"].model))
    expect = red.system.J[np.ix_(red.system.ext_idx, red.system.ext_idx)] - red.J_c @ np.linalg.solve(
        red.J_int, red.J_c.T
    )
    np.testing.assert_allclose(red.J_red, expect, atol=1e-10)
    np.testing.assert_allclose(red.J_red, red.J_red.T, atol=1e-10)


def test_recover_interior_round_trip(docs):
    red = kron_reduce(assemble(docs["radial_ygd"].model))
    sys = red.system
    rng = np.random.default_rng(3)
    V = rng.normal(size=sys.J.shape[0])
    S = sys.J @ V
    V_int = recover_interior(red, S[sys.int_idx], V[sys.ext_idx])
    np.testing.assert_allclose(V_int, V[sys.int_idx], atol=1e-9)

import numpy as np
import pytest

from gfmnet.branches import (
    PHASES,
    SYNC_KINDS,
    BranchKind,
    admittance_blocks,
    balanced_vector,
    branch_pf_matrix,
    finite_difference_jacobian,
    jacobian_blocks,
    verify_branch_properties,
)
from gfmnet.errors import ModelError

THREE_PHASE = [k for k in BranchKind if k is not BranchKind.Single]


@pytest.mark.parametrize("kind", THREE_PHASE)
def test_three_phase_blocks(kind):
    blk = jacobian_blocks(kind)
    assert blk.n_i == blk.n_k == 3
    J = branch_pf_matrix(2.0, blk)
    assert J.shape == (12, 12)
    np.testing.assert_allclose(J, J.T, atol=1e-12)


@pytest.mark.parametrize("phase", PHASES)
def test_single_to_three_phase_shape(phase):
    blk = jacobian_blocks(BranchKind.Single, phase)
    assert (blk.n_i, blk.n_k) == (1, 3)
    assert branch_pf_matrix(1.0, blk).shape == (8, 8)


def test_single_without_phase_is_one_phase_both_ends():
    blk = jacobian_blocks(BranchKind.Single)
    assert (blk.n_i, blk.n_k) == (1, 1)


def test_phase_only_allowed_on_single():
    with pytest.raises(ModelError):
        jacobian_blocks(BranchKind.Line3, "a")


@pytest.mark.parametrize("kind", list(BranchKind))
def test_balanced_direction_in_kernel(kind):
    blk = jacobian_blocks(kind, "b" if kind is BranchKind.Single else None)
    J = branch_pf_matrix(3.0, blk)
    nu = np.concatenate([balanced_vector(blk.n_i), balanced_vector(blk.n_k)])
    assert np.linalg.norm(J @ nu) < 1e-12


def test_branch_matrix_scales_linearly_with_b():
    blk = jacobian_blocks(BranchKind.YgD)
    np.testing.assert_allclose(branch_pf_matrix(4.0, blk), 4.0 * branch_pf_matrix(1.0, blk))


def test_sync_kinds_pass_strict_checks():
    for kind in SYNC_KINDS:
        rep = verify_branch_properties(kind)
        assert rep.passed and rep.jii_definite and rep.schur_zero


def test_non_sync_kinds_skip_strict_checks():
    rep = verify_branch_properties(BranchKind.DD)
    assert rep.passed
    assert rep.jii_definite is None and rep.schur_norm is None


def test_admittance_symmetric():
    for kind in THREE_PHASE:
        Y = admittance_blocks(kind).matrix(1.5)
        np.testing.assert_allclose(Y, Y.T, atol=1e-14)


def test_oracle_matches_table_for_ygd():
    blk = jacobian_blocks(BranchKind.YgD)
    fd = finite_difference_jacobian(BranchKind.YgD, 2.0)
    np.testing.assert_allclose(fd, branch_pf_matrix(2.0, blk), atol=1e-6)

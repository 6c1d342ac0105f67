"""Admittance and linearized power-flow blocks of the standard branch kinds.

All branches are lossless and expressed in per-unit. The linearization point
is nominal magnitude on every phase with the terminal angles that give zero
flow; for a Yg-Delta or Y-Delta the secondary sits 30 degrees behind the
primary.

Integer patterns are kept exact and scaled by ``sqrt(3)`` only at the end, so
the structural identities hold to round-off.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ModelError

SQRT3 = np.sqrt(3.0)
PHASES = ("a", "b", "c")


class BranchKind(str, enum.Enum):
    YgYg = "YgYg"
    YgY = "YgY"
    YgD = "YgD"
    YY = "YY"
    YD = "YD"
    DD = "DD"
    Line3 = "Line3"
    Single = "Single"

    def __str__(self):
        return self.value


SYNC_KINDS = frozenset({BranchKind.YgYg, BranchKind.Line3, BranchKind.YgD, BranchKind.Single})
TRANSFORMER_KINDS = frozenset(
    {BranchKind.YgYg, BranchKind.YgY, BranchKind.YgD, BranchKind.YY, BranchKind.YD, BranchKind.DD}
)

# Admittance patterns. Y2 carries 1/sqrt(3): the delta winding sees line-to-line
# voltage, and with that scaling a zero-flow point exists at 1 p.u. on both sides.
_Y1 = np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]]) / 3.0
_Y2 = np.array([[-1, 1, 0], [0, -1, 1], [1, 0, -1]]) / SQRT3

# Jacobian patterns. Values are scaled consistently with the identity blocks of
# the grounded-wye and line rows (the Jacobian of S = V * conj(I) / 2 with the
# admittances above, times -2).
_P1 = np.array([[4, 1, 1], [1, 4, 1], [1, 1, 4]]) / 6.0
_P2 = SQRT3 / 6.0 * np.array([[0, 1, -1], [-1, 0, 1], [1, -1, 0]])
_P3 = np.array([[1, 0, 1], [1, 1, 0], [0, 1, 1]]) / 2.0
_P4 = SQRT3 / 6.0 * np.array([[1, 0, -1], [-1, 1, 0], [0, -1, 1]])

_I3 = np.eye(3)
_Z3 = np.zeros((3, 3))


def Y1():
    return _Y1.copy()


def Y2():
    return _Y2.copy()


def P1():
    return _P1.copy()


def P2():
    return _P2.copy()


def P3():
    return _P3.copy()


def P4():
    return _P4.copy()


def incidence_vector(phase):
    """Row vector (1, 3) selecting ``phase`` of a three-phase node."""
    try:
        k = PHASES.index(phase)
    except ValueError:
        raise ModelError(f"unknown phase {phase!r}; expected one of {PHASES}") from None
    vec = np.zeros((1, 3))
    vec[0, k] = 1.0
    return vec


@dataclass(frozen=True)
class AdmittanceBlocks:
    Y_ii: np.ndarray
    Y_ik: np.ndarray
    Y_kk: np.ndarray

    def matrix(self, b=1.0):
        """Full complex branch admittance ``j b [[Y_ii, Y_ik], [Y_ik^T, Y_kk]]``."""
        return 1j * b * np.block([[self.Y_ii, self.Y_ik], [self.Y_ik.T, self.Y_kk]])


@dataclass(frozen=True)
class JacobianBlocks:
    """Per-branch linearized flow blocks.

    ``P_ik`` and ``R_ik`` are shaped ``(n_k, n_i)``: ``J_ik`` is the block the
    branch contributes to the secondary node's rows of the incidence matrix.
    """

    P_ii: np.ndarray
    R_ii: np.ndarray
    P_ik: np.ndarray
    R_ik: np.ndarray

    @property
    def J_ii(self):
        return np.block([[self.P_ii, -self.R_ii.T], [-self.R_ii, self.P_ii]])

    @property
    def J_ik(self):
        return np.block([[-self.P_ik, -self.R_ik], [self.R_ik, -self.P_ik]])

    @property
    def n_i(self):
        return self.P_ii.shape[0]

    @property
    def n_k(self):
        return self.P_ik.shape[0]


def _check_incidence(kind, phase_incidence):
    kind = BranchKind(kind)
    if kind is BranchKind.Single:
        return kind
    if phase_incidence is not None:
        raise ModelError(f"phase_incidence is only meaningful for Single branches, got {kind}")
    return kind


def admittance_blocks(kind, phase_incidence=None):
    """Admittance blocks of one branch kind.

    ``phase_incidence`` is the phase letter for a single-phase branch landing
    on a three-phase node and ``None`` everywhere else.
    """
    kind = _check_incidence(kind, phase_incidence)
    if kind in (BranchKind.YgYg, BranchKind.Line3):
        return AdmittanceBlocks(_I3.copy(), -_I3.copy(), _I3.copy())
    if kind in (BranchKind.YgY, BranchKind.YY, BranchKind.DD):
        return AdmittanceBlocks(Y1(), -Y1(), Y1())
    if kind is BranchKind.YgD:
        return AdmittanceBlocks(_I3.copy(), Y2(), Y1())
    if kind is BranchKind.YD:
        return AdmittanceBlocks(Y1(), Y2(), Y1())
    # Single
    if phase_incidence is None:
        return AdmittanceBlocks(np.ones((1, 1)), -np.ones((1, 1)), np.ones((1, 1)))
    inc = incidence_vector(phase_incidence)
    return AdmittanceBlocks(np.ones((1, 1)), -inc, inc.T @ inc)


def jacobian_blocks(kind, phase_incidence=None):
    """Linearized power-flow blocks ``(P_ii, R_ii, P_ik, R_ik)`` of one branch kind."""
    kind = _check_incidence(kind, phase_incidence)
    if kind in (BranchKind.YgYg, BranchKind.Line3):
        return JacobianBlocks(_I3.copy(), _Z3.copy(), _I3.copy(), _Z3.copy())
    if kind in (BranchKind.YgY, BranchKind.YY, BranchKind.DD):
        return JacobianBlocks(P1(), P2(), P1(), P2())
    if kind is BranchKind.YgD:
        return JacobianBlocks(_I3.copy(), _Z3.copy(), P3(), P4())
    if kind is BranchKind.YD:
        return JacobianBlocks(P1(), P2(), P3(), P4())
    if phase_incidence is None:
        return JacobianBlocks(np.ones((1, 1)), np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 1)))
    inc = incidence_vector(phase_incidence)
    return JacobianBlocks(np.ones((1, 1)), np.zeros((1, 1)), inc.T, np.zeros((3, 1)))


def branch_pf_matrix(b, blocks):
    """Branch power-flow matrix ``b [J_ii; J_ik] [J_ii^T  J_ik^T]``."""
    if not b > 0:
        raise ModelError(f"branch susceptance must be positive, got {b}")
    stacked = np.vstack([blocks.J_ii, blocks.J_ik])
    return b * (stacked @ stacked.T)


def balanced_vector(n):
    """``(1_n, 0_n)``: equal angle shift on all phases, no magnitude change."""
    return np.concatenate([np.ones(n), np.zeros(n)])


@dataclass
class PropertyReport:
    kind: BranchKind
    branch_psd: bool
    jii_psd: bool
    balanced_nullvector: bool
    jii_definite: bool | None
    schur_zero: bool | None
    min_eig_branch: float
    min_eig_jii: float
    schur_norm: float | None

    @property
    def passed(self):
        checks = [self.branch_psd, self.jii_psd, self.balanced_nullvector]
        checks += [c for c in (self.jii_definite, self.schur_zero) if c is not None]
        return all(checks)


def verify_branch_properties(kind, phase_incidence=None, b=1.0, tol=1e-10):
    """Check the structural properties every branch matrix must have.

    The strict-definiteness and Schur-complement checks only apply to sync
    kinds and are reported as ``None`` otherwise.
    """
    kind = BranchKind(kind)
    blocks = jacobian_blocks(kind, phase_incidence)
    Jb = branch_pf_matrix(b, blocks)
    Jii = blocks.J_ii
    Jik = blocks.J_ik
    min_b = float(np.linalg.eigvalsh(Jb).min())
    min_ii = float(np.linalg.eigvalsh(0.5 * (Jii + Jii.T)).min())
    nu = np.concatenate([balanced_vector(blocks.n_i), balanced_vector(blocks.n_k)])
    null_ok = bool(np.linalg.norm(Jb @ nu) < tol)
    definite = schur = schur_norm = None
    if kind in SYNC_KINDS:
        definite = min_ii > tol
        G = Jii @ Jii.T
        S = Jik @ Jik.T - Jik @ Jii @ np.linalg.solve(G, Jii @ Jik.T)
        schur_norm = float(np.linalg.norm(S))
        schur = schur_norm < tol
    return PropertyReport(
        kind=kind,
        branch_psd=min_b >= -tol,
        jii_psd=min_ii >= -tol,
        balanced_nullvector=null_ok,
        jii_definite=definite,
        schur_zero=schur,
        min_eig_branch=min_b,
        min_eig_jii=min_ii,
        schur_norm=schur_norm,
    )


# -- nonlinear oracle --------------------------------------------------------

NOMINAL_ANGLES = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0])
# Sign/scale between the Jacobian of S = V * conj(I) / 2 (with I = j b Y V) and
# the branch power-flow matrix: the 1/2 and the sign of j b are absorbed.
ORACLE_SCALE = -2.0

_SECONDARY_SHIFT = {BranchKind.YgD: -np.pi / 6.0, BranchKind.YD: -np.pi / 6.0}


def zero_flow_angles(kind, phase_incidence=None):
    """Terminal angles ``(theta_i, theta_k)`` of the zero-flow linearization point."""
    kind = BranchKind(kind)
    if kind is BranchKind.Single:
        if phase_incidence is None:
            return np.zeros(1), np.zeros(1)
        k = PHASES.index(phase_incidence)
        return NOMINAL_ANGLES[k : k + 1].copy(), NOMINAL_ANGLES.copy()
    shift = _SECONDARY_SHIFT.get(kind, 0.0)
    return NOMINAL_ANGLES.copy(), NOMINAL_ANGLES + shift


def branch_power(kind, b, theta_i, v_i, theta_k, v_k, phase_incidence=None):
    """Nonlinear complex power into both terminals, ``S = V * conj(I) / 2``.

    Returns the real vector ``(P_ik, Q_ik, P_ki, Q_ki)``.
    """
    Y = admittance_blocks(kind, phase_incidence).matrix(b)
    V = np.concatenate([v_i * np.exp(1j * theta_i), v_k * np.exp(1j * theta_k)])
    S = 0.5 * V * np.conj(Y @ V)
    ni = len(theta_i)
    return np.concatenate([S.real[:ni], S.imag[:ni], S.real[ni:], S.imag[ni:]])


def finite_difference_jacobian(kind, b=1.0, phase_incidence=None, step=1e-6):
    """Central-difference Jacobian of ``branch_power`` at the zero-flow point.

    Coordinates are ordered ``(theta_i, v_i, theta_k, v_k)``, matching the
    branch power-flow matrix; the result is already multiplied by
    ``ORACLE_SCALE``.
    """
    th_i, th_k = zero_flow_angles(kind, phase_incidence)
    ni, nk = len(th_i), len(th_k)
    x0 = np.concatenate([th_i, np.ones(ni), th_k, np.ones(nk)])

    def f(x):
        return branch_power(
            kind, b, x[:ni], x[ni : 2 * ni], x[2 * ni : 2 * ni + nk], x[2 * ni + nk :], phase_incidence
        )

    n = len(x0)
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        jac[:, j] = (f(x0 + e) - f(x0 - e)) / (2.0 * step)
    return ORACLE_SCALE * jac

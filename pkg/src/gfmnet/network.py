"""Network matrix assembly, exterior/interior partition and Kron reduction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .branches import branch_pf_matrix, jacobian_blocks
from .errors import ModelError, RankDeficientInterior, ValidationFailed
from .topology import validate

DEFAULT_TOL_RANK = 1e-8


@dataclass(frozen=True)
class NodeSlot:
    offset: int
    width: int

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.width)

    @property
    def phases(self):
        return self.width // 2


@dataclass(frozen=True)
class AssembledSystem:
    model: object
    B: np.ndarray
    W: np.ndarray
    J: np.ndarray
    layout: dict
    ext_idx: np.ndarray
    int_idx: np.ndarray

    @property
    def n_coords(self):
        return self.J.shape[0]

    def node_slice(self, node_id):
        return self.layout[node_id].slice

    def balanced(self):
        """Stacked balanced vector: unit angle shift on every phase of every node."""
        nu = np.zeros(self.n_coords)
        for slot in self.layout.values():
            nu[slot.offset : slot.offset + slot.phases] = 1.0
        return nu


def _layout(model):
    layout, off = {}, 0
    for node in model.nodes:
        layout[node.id] = NodeSlot(off, 2 * node.phase_count)
        off += 2 * node.phase_count
    return layout, off


def assemble(model, *, check=True):
    """Build ``B``, ``W`` and ``J = B W B^T`` in node order.

    With ``check`` the model must pass ``validate``; tests use ``check=False``
    to push ill-posed networks through to the rank test.
    """
    if check:
        report = validate(model)
        if not report.passed:
            raise ValidationFailed(report)
    layout, n = _layout(model)
    widths = [2 * model.node(br.from_node).phase_count for br in model.branches]
    n_e = int(sum(widths))
    B = np.zeros((n, n_e))
    w = np.zeros(n_e)
    J_sum = np.zeros((n, n))
    col = 0
    for br, width in zip(model.branches, widths):
        blocks = jacobian_blocks(br.kind, br.phase_incidence)
        si, sk = layout[br.from_node].slice, layout[br.to_node].slice
        B[si, col : col + width] = blocks.J_ii
        B[sk, col : col + width] = blocks.J_ik
        w[col : col + width] = br.susceptance_b
        # second route: sum of embedded branch matrices
        Jb = branch_pf_matrix(br.susceptance_b, blocks)
        idx = np.r_[si, sk]
        J_sum[np.ix_(idx, idx)] += Jb
        col += width
    W = np.diag(w)
    J = B @ W @ B.T
    scale = max(1.0, float(np.abs(J).max(initial=0.0)))
    if np.abs(J - J_sum).max(initial=0.0) > 1e-12 * scale:
        raise ModelError("incidence and branch-sum assembly routes disagree")
    if np.abs(J - J.T).max(initial=0.0) > 1e-12 * scale:
        raise ModelError("assembled network matrix is not symmetric")
    ext, intr = [], []
    for node in model.nodes:
        rng = range(layout[node.id].offset, layout[node.id].offset + layout[node.id].width)
        (ext if node.exterior else intr).extend(rng)
    return AssembledSystem(
        model, B, W, J, layout, np.array(ext, dtype=int), np.array(intr, dtype=int)
    )


def partition(sys):
    """Return ``(J_ext, J_c, J_int)`` with rows/columns in node order within each group."""
    if sys.ext_idx.size == 0:
        raise ModelError("network has no exterior nodes")
    J = sys.J
    e, i = sys.ext_idx, sys.int_idx
    return J[np.ix_(e, e)], J[np.ix_(e, i)], J[np.ix_(i, i)]


@dataclass(frozen=True)
class ReducedNetwork:
    system: AssembledSystem
    J_red: np.ndarray
    input_map: np.ndarray
    J_c: np.ndarray
    J_int: np.ndarray
    factor: tuple | None
    rank_ratio: float

    def solve_int(self, rhs):
        if self.factor is None:
            return np.zeros((0,) + np.shape(rhs)[1:])
        return sla.cho_solve(self.factor, rhs)

    @property
    def ext_layout(self):
        """Node id -> slot inside the exterior coordinate vector."""
        return _group_layout(self.system, exterior=True)

    @property
    def int_layout(self):
        return _group_layout(self.system, exterior=False)


def _group_layout(sys, exterior):
    out, off = {}, 0
    for node in sys.model.nodes:
        if node.exterior == exterior:
            out[node.id] = NodeSlot(off, 2 * node.phase_count)
            off += 2 * node.phase_count
    return out


def kron_reduce(sys, tol_rank=DEFAULT_TOL_RANK):
    """Eliminate interior nodes through the Schur complement of ``J_int``.

    Raises ``RankDeficientInterior`` when ``sigma_min / sigma_max`` of
    ``J_int`` falls below ``tol_rank``.
    """
    J_ext, J_c, J_int = partition(sys)
    if J_int.size == 0:
        return ReducedNetwork(sys, J_ext.copy(), np.zeros((J_ext.shape[0], 0)), J_c, J_int, None, 1.0)
    sv = np.linalg.svd(J_int, compute_uv=False)
    ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
    if ratio < tol_rank:
        raise RankDeficientInterior(ratio, tol_rank)
    factor = sla.cho_factor(J_int)
    input_map = sla.cho_solve(factor, J_c.T).T
    J_red = J_ext - input_map @ J_c.T
    J_red = 0.5 * (J_red + J_red.T)
    return ReducedNetwork(sys, J_red, input_map, J_c, J_int, factor, ratio)


def recover_interior(red, S_int, V_ext, *, check=True):
    """Interior voltages ``J_int^{-1} (S_int - J_c^T V_ext)``.

    ``S_int`` and ``V_ext`` may carry a trailing sample axis.
    """
    S_int = np.asarray(S_int, dtype=float)
    V_ext = np.asarray(V_ext, dtype=float)
    n_int = red.J_int.shape[0]
    if S_int.shape[0] != n_int or V_ext.shape[0] != red.J_red.shape[0]:
        raise ModelError(
            f"dimension mismatch: expected S_int of {n_int} and V_ext of {red.J_red.shape[0]} rows"
        )
    rhs = S_int - red.J_c.T @ V_ext
    V_int = red.solve_int(rhs)
    if check and n_int:
        res = red.J_c.T @ V_ext + red.J_int @ V_int - S_int
        scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
        if np.abs(res).max(initial=0.0) > 1e-9 * scale:
            raise ModelError("interior recovery residual too large")
    return V_int

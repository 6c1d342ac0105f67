"""Closed-loop assembly, nullspace and spectrum, and the stability certificate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .branches import SYNC_KINDS, BranchKind, P3, P4
from .controllers import DroopLaw, control_matrices, state_layout
from .errors import ModelError, NonUniformDroop
from .network import DEFAULT_TOL_RANK, assemble, kron_reduce

DEFAULT_TOL_ZERO = 1e-9
STABLE_MARGIN = 1e-9
COND3_NODE_GUARD = 20


def h_matrix():
    p3, p4 = P3(), P4()
    return np.block([[p3, p4], [-p4, p3]])


def h_power(r):
    """``h**r`` using the period ``h**7 == h``."""
    r = int(r)
    if r < 0:
        raise ValueError("h_power needs r >= 0")
    if r == 0:
        return np.eye(6)
    return np.linalg.matrix_power(h_matrix(), (r - 1) % 6 + 1)


def mu3():
    return np.vstack([np.eye(3), np.zeros((3, 3))])


@dataclass(frozen=True)
class ClosedLoopModel:
    reduced: object
    layout: object
    E: np.ndarray
    M: np.ndarray
    L: np.ndarray
    J_cl: np.ndarray
    J_cl_red: np.ndarray
    input_map_cl: np.ndarray
    ext_load_map: np.ndarray
    heterogeneous: bool

    @property
    def system(self):
        return self.reduced.system

    @property
    def model(self):
        return self.reduced.system.model

    @property
    def symmetric(self):
        return not self.heterogeneous

    def forcing(self, load_ext, load_int):
        """Constant input ``u`` produced by consumed powers at exterior and interior coordinates."""
        return self.ext_load_map @ load_ext + self.input_map_cl @ (-load_int)


def assemble_closed_loop(red, specs, *, allow_heterogeneous=False, tol=1e-10):
    """Closed-loop matrices on the converter state.

    ``J_cl`` lives on (converter states, interior coordinates); ``J_cl_red``
    is the reduced dynamics matrix so that ``dx/dt = J_cl_red x + u``.
    """
    model = red.system.model
    layout = state_layout(specs, model)
    ext_layout = red.ext_layout
    n_ext = red.J_red.shape[0]
    E = np.zeros((n_ext, layout.dim))
    L = np.zeros((layout.dim, layout.dim))
    m = np.zeros(layout.dim)
    for blk in layout.blocks:
        cm = control_matrices(blk.spec)
        E[ext_layout[blk.node].slice, blk.slice] = cm.E
        L[blk.slice, blk.slice] = cm.local_term
        m[blk.slice] = blk.spec.m_d
    heterogeneous = bool(np.ptp(m) > 0)
    if heterogeneous and not allow_heterogeneous:
        raise NonUniformDroop(
            f"converters use different m_d values {sorted(set(m.tolist()))}; pass allow_heterogeneous"
        )
    M = np.diag(m)
    m_int = float(m.mean())
    J_ext = red.system.J[np.ix_(red.system.ext_idx, red.system.ext_idx)]
    J_int = red.J_int
    n_int = J_int.shape[0]
    top = np.hstack([M @ E.T @ J_ext @ E + L, M @ E.T @ red.J_c])
    bottom = np.hstack([m_int * red.J_c.T @ E, m_int * J_int])
    J_cl = np.vstack([top, bottom])

    route_direct = M @ E.T @ red.J_red @ E + L
    if n_int:
        A = J_cl[: layout.dim, : layout.dim]
        C = J_cl[: layout.dim, layout.dim :]
        D = J_cl[layout.dim :, layout.dim :]
        G = J_cl[layout.dim :, : layout.dim]
        route_full = A - C @ np.linalg.solve(D, G)
    else:
        route_full = J_cl.copy()
    scale = max(1.0, float(np.abs(route_direct).max()))
    if np.abs(route_full - route_direct).max() > tol * scale:
        raise ModelError("closed-loop reduction routes disagree")
    if not heterogeneous:
        route_direct = 0.5 * (route_direct + route_direct.T)
    J_cl_red = -route_direct
    input_map_cl = -M @ E.T @ red.input_map
    ext_load_map = -M @ E.T
    return ClosedLoopModel(
        red, layout, E, M, L, J_cl, J_cl_red, input_map_cl, ext_load_map, heterogeneous
    )


@dataclass
class NullspaceResult:
    basis: np.ndarray
    dim: int
    spectrum: np.ndarray
    basis_full: np.ndarray
    dim_full: int


def _symmetric_null(A, tol):
    w, V = np.linalg.eigh(A)
    scale = max(float(np.abs(w).max(initial=0.0)), np.finfo(float).tiny)
    mask = np.abs(w) < tol * scale
    return V[:, mask], w


def nullspace(cl, tol_zero=DEFAULT_TOL_ZERO):
    """Kernel of ``J_cl_red`` (and of the unreduced ``J_cl``) with a relative zero cut."""
    A = cl.J_cl_red
    if cl.symmetric:
        basis, w = _symmetric_null(A, tol_zero)
        spectrum = np.sort(w)
    else:
        w = np.linalg.eigvals(A)
        spectrum = w[np.argsort(w.real)]
        basis = sla.null_space(A, rcond=tol_zero)
    if cl.symmetric:
        full, _ = _symmetric_null(cl.J_cl, tol_zero)
    else:
        full = sla.null_space(cl.J_cl, rcond=tol_zero)
    return NullspaceResult(basis, basis.shape[1], spectrum, full, full.shape[1])


def node_block(cl, basis_full, node):
    """Rows of an unreduced nullspace basis belonging to ``node``."""
    layout = cl.layout
    if any(b.node == node for b in layout.blocks):
        return basis_full[layout.block(node).slice]
    slot = cl.reduced.int_layout[node]
    return basis_full[layout.dim + slot.offset : layout.dim + slot.offset + slot.width]


# -- topological conditions --------------------------------------------------


@dataclass
class ConditionResult:
    fired: int | None
    witness: object = None
    notes: list = field(default_factory=list)


def _exterior_pairs_condition3(model, guard):
    three = [n for n in model.nodes if n.phase_count == 3]
    if len(three) > guard:
        return None, f"condition 3 search skipped: {len(three)} three-phase nodes exceed guard {guard}"
    adj = {n.id: [] for n in model.nodes}
    for l, br in enumerate(model.branches):
        if br.kind not in SYNC_KINDS:
            continue
        adj[br.from_node].append((br.to_node, l, +1))
        adj[br.to_node].append((br.from_node, l, -1))
    ext = model.exterior_ids
    ext_set = set(ext)

    for src in ext:
        # DFS over simple paths; state = (node, visited, ygd signs seen)
        stack = [(src, [src], frozenset([src]), 0, 0)]
        while stack:
            u, path, seen, pos, neg = stack.pop()
            if u != src and u in ext_set:
                if pos or neg:
                    return {"path": path, "ygd_edges": pos + neg}, None
            for v, l, sign in adj[u]:
                if v in seen:
                    continue
                p2, n2 = pos, neg
                if model.branches[l].kind is BranchKind.YgD:
                    if sign > 0:
                        p2 += 1
                    else:
                        n2 += 1
                    if p2 and n2:
                        continue
                stack.append((v, path + [v], seen | {v}, p2, n2))
    return None, None


def check_stability_conditions(model, specs, guard=COND3_NODE_GUARD):
    """First sufficient topological condition that holds, in order 1, 2, 3."""
    specs = list(specs)
    for s in specs:
        if s.law is DroopLaw.PositiveSequenceDroop and model.node(s.node).phase_count == 3:
            return ConditionResult(1, {"node": s.node})
    for s in specs:
        if s.law is DroopLaw.GeneralizedDroop and s.k_bal > 0:
            return ConditionResult(2, {"node": s.node, "k_bal": s.k_bal})
    witness, note = _exterior_pairs_condition3(model, guard)
    notes = [note] if note else []
    if witness is not None:
        return ConditionResult(3, witness, notes)
    return ConditionResult(None, None, notes)


# -- certificate -------------------------------------------------------------

STABLE = "stable"
INDETERMINATE = "indeterminate"
UNSTABLE = "unstable-structure"


@dataclass
class StabilityCertificate:
    verdict: str
    fired_condition: int | None
    nullspace_basis: np.ndarray
    nullspace_dim: int
    spectrum: np.ndarray
    balanced_subspace_check: bool
    witness: object = None
    notes: list = field(default_factory=list)
    closed_loop: ClosedLoopModel | None = None

    def smallest(self, k=10):
        s = np.asarray(self.spectrum)
        return s[np.argsort(np.abs(s), kind="stable")[:k]]

    def as_dict(self):
        small = self.smallest()
        if np.iscomplexobj(small):
            small_out = [[float(z.real), float(z.imag)] for z in small]
        else:
            small_out = [float(z) for z in small]
        return {
            "verdict": self.verdict,
            "fired_condition": self.fired_condition,
            "nullspace_dim": int(self.nullspace_dim),
            "balanced_subspace_check": bool(self.balanced_subspace_check),
            "smallest_eigenvalues": small_out,
            "witness": self.witness,
            "notes": list(self.notes),
        }


def balanced_check(cl, basis, tol=1e-8):
    """Whether ``basis`` spans exactly the stacked balanced state direction."""
    if basis.shape[1] != 1:
        return False
    xi = cl.layout.balanced()
    xi /= np.linalg.norm(xi)
    v = basis[:, 0]
    return bool(np.linalg.norm(v - xi * (xi @ v)) < tol)


def certify(
    model,
    specs,
    *,
    tol_rank=DEFAULT_TOL_RANK,
    tol_zero_eig=DEFAULT_TOL_ZERO,
    allow_heterogeneous=False,
    check=True,
):
    """Run the full pipeline and classify the network.

    ``stable`` needs a sufficient topological condition plus a clean
    spectrum; a clean spectrum alone yields ``indeterminate``.
    """
    if not model.exterior_ids:
        raise ModelError("stability analysis needs at least one converter")
    specs = list(specs)
    sys = assemble(model, check=check)
    red = kron_reduce(sys, tol_rank)
    cl = assemble_closed_loop(red, specs, allow_heterogeneous=allow_heterogeneous)
    ns = nullspace(cl, tol_zero_eig)
    cond = check_stability_conditions(model, specs)
    notes = list(cond.notes)
    if cl.heterogeneous:
        notes.append("heterogeneous m_d: verdict is numerical only")
    balanced = balanced_check(cl, ns.basis)
    spec_real = np.real(ns.spectrum)
    scale = max(float(np.abs(ns.spectrum).max(initial=0.0)), np.finfo(float).tiny)
    zero = np.abs(ns.spectrum) < tol_zero_eig * scale
    clean = ns.dim == 1 and int(zero.sum()) == 1 and bool(np.all(spec_real[~zero] / scale < -STABLE_MARGIN))
    if ns.dim > 1 or not balanced or not clean:
        verdict = UNSTABLE
    elif cond.fired is not None and not cl.heterogeneous:
        verdict = STABLE
    else:
        verdict = INDETERMINATE
        if cond.fired is None:
            notes.append("spectrum is clean but no sufficient topological condition holds")
    return StabilityCertificate(
        verdict, cond.fired, ns.basis, ns.dim, ns.spectrum, balanced, cond.witness, notes, cl
    )

"""Time-domain simulation of the reduced closed loop and unbalance metrics."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _kernels
from .controllers import DroopLaw
from .errors import ModelError, NotStable
from .network import recover_interior
from .stability import DEFAULT_TOL_ZERO, assemble_closed_loop, nullspace

DEFAULT_DT = 1e-3
DEFAULT_T_END = 2.0
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class LoadStep:
    """Consumed power deviation at one node, switched on at ``t_start``."""

    node: str
    dP: tuple
    dQ: tuple
    t_start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dP", tuple(float(x) for x in self.dP))
        object.__setattr__(self, "dQ", tuple(float(x) for x in self.dQ))
        if len(self.dP) != len(self.dQ):
            raise ModelError(f"load at {self.node}: dP and dQ lengths differ")
        if not all(math.isfinite(x) for x in self.dP + self.dQ + (self.t_start,)):
            raise ModelError(f"load at {self.node}: non-finite value")

    def scaled(self, factor):
        return dataclasses.replace(
            self, dP=tuple(factor * x for x in self.dP), dQ=tuple(factor * x for x in self.dQ)
        )


def delta_ac_load(node, power, t_start=0.0):
    """Resistive load of total active power ``power`` between phases a and c.

    At nominal voltage the a-c current splits into ``P/2 + jP/(2 sqrt 3)`` on
    phase a and ``P/2 - jP/(2 sqrt 3)`` on phase c.
    """
    q = power / (2.0 * SQRT3)
    return LoadStep(node, (power / 2.0, 0.0, power / 2.0), (q, 0.0, -q), t_start)


def balanced_load(node, power, phases=3, t_start=0.0):
    return LoadStep(node, (power / phases,) * phases, (0.0,) * phases, t_start)


def _load_vectors(cl, loads, t=None):
    """Consumed-power vectors on exterior and interior coordinates."""
    red = cl.reduced
    ext_l, int_l = red.ext_layout, red.int_layout
    load_ext = np.zeros(red.J_red.shape[0])
    load_int = np.zeros(red.J_int.shape[0])
    model = cl.model
    for ld in loads:
        if t is not None and ld.t_start > t:
            continue
        if ld.node not in model._index:
            raise ModelError(f"load references unknown node {ld.node!r}")
        n = model.node(ld.node).phase_count
        if len(ld.dP) != n:
            raise ModelError(f"load at {ld.node}: {len(ld.dP)} phases given, node has {n}")
        vec = np.concatenate([ld.dP, ld.dQ])
        if ld.node in ext_l:
            load_ext[ext_l[ld.node].slice] += vec
        else:
            load_int[int_l[ld.node].slice] += vec
    return load_ext, load_int


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    V_ext: np.ndarray
    V_int: np.ndarray
    omega: np.ndarray
    PQ_ext: np.ndarray
    S_int: np.ndarray
    closed_loop: object
    method: str

    def node_voltage(self, node):
        """``(theta, v)`` arrays of shape ``(n_samples, phases)``."""
        red = self.closed_loop.reduced
        if node in red.ext_layout:
            slot, V = red.ext_layout[node], self.V_ext
        else:
            slot, V = red.int_layout[node], self.V_int
        block = V[:, slot.slice]
        n = slot.phases
        return block[:, :n], block[:, n:]

    def node_power(self, node):
        """``(P, Q)`` injected at ``node``: converter output or minus the local load."""
        red = self.closed_loop.reduced
        if node in red.ext_layout:
            slot, S = red.ext_layout[node], self.PQ_ext
        else:
            slot, S = red.int_layout[node], self.S_int
        block = S[:, slot.slice]
        n = slot.phases
        return block[:, :n], block[:, n:]

    def columns(self):
        """Stable CSV column names and the matching data matrix."""
        names, cols = ["time"], [self.t[:, None]]
        model = self.closed_loop.model
        for node in model.nodes:
            th, v = self.node_voltage(node.id)
            phs = "abc" if node.phase_count == 3 else "x"
            names += [f"theta_{node.id}_{p}" for p in phs] + [f"v_{node.id}_{p}" for p in phs]
            cols += [th, v]
        col = 0
        for blk in self.closed_loop.layout.blocks:
            k = blk.angle_dim
            if blk.law is DroopLaw.PositiveSequenceDroop:
                tags = ["pos"]
            else:
                tags = list("abc") if k == 3 else ["x"]
            names += [f"omega_{blk.node}_{p}" for p in tags]
            cols.append(self.omega[:, col : col + k])
            col += k
            P, Q = self.node_power(blk.node)
            phs = "abc" if P.shape[1] == 3 else "x"
            names += [f"P_{blk.node}_{p}" for p in phs] + [f"Q_{blk.node}_{p}" for p in phs]
            cols += [P, Q]
        return names, np.hstack(cols)


def _snapshot(cl, X, U, load_ext, load_int):
    """Derived quantities for state samples ``X`` (rows) under loads per row."""
    red = cl.reduced
    V_ext = X @ cl.E.T
    S_int = -load_int
    V_int = recover_interior(red, S_int.T, V_ext.T).T if red.J_int.size else np.zeros((len(X), 0))
    PQ_ext = V_ext @ red.J_red.T + load_ext - load_int @ red.input_map.T
    omega = (X @ cl.J_cl_red.T + U)[:, cl.layout.angle_index]
    return V_ext, V_int, omega, PQ_ext, S_int


class _Stepper:
    def __init__(self, A, method, backend):
        self.A = A
        self.method = method
        self.backend = backend
        self._cache = {}

    def _phi_psi(self, h):
        key = round(h, 15)
        if key not in self._cache:
            d = self.A.shape[0]
            aug = np.zeros((2 * d, 2 * d))
            aug[:d, :d] = self.A * h
            aug[:d, d:] = np.eye(d) * h
            ex = sla.expm(aug)
            self._cache[key] = (ex[:d, :d], ex[:d, d:])
        return self._cache[key]

    def run(self, x, u, h, n):
        if self.method == "expm":
            Phi, Psi = self._phi_psi(h)
            return _kernels.affine_steps(Phi, Psi @ u, x, n, self.backend)
        return _kernels.rk4_steps(self.A, u, x, h, n, self.backend)


def simulate(cl, x0=None, loads=(), t_end=DEFAULT_T_END, dt=DEFAULT_DT, *, method="expm", backend=None):
    """Integrate ``dx/dt = J_cl_red x + u(t)`` on the grid ``k * dt``.

    ``method="expm"`` propagates exactly on every constant-input interval,
    splitting steps at load switching times; ``method="rk4"`` uses classic
    Runge-Kutta on the same sub-steps.
    """
    if method not in ("expm", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    if not (math.isfinite(dt) and dt > 0):
        raise ModelError("dt must be positive and finite")
    if not (math.isfinite(t_end) and t_end > 0):
        raise ModelError("t_end must be positive and finite")
    loads = list(loads)
    d = cl.layout.dim
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x0.shape != (d,) or not np.all(np.isfinite(x0)):
        raise ModelError(f"x0 must be a finite vector of length {d}")
    n = int(round(t_end / dt))
    t = dt * np.arange(n + 1)
    eps = 1e-9 * dt
    events = sorted({ld.t_start for ld in loads if 0.0 < ld.t_start < t[-1] + eps})
    stepper = _Stepper(cl.J_cl_red, method, backend)

    def forcing(time):
        le, li = _load_vectors(cl, loads, time + eps)
        return cl.forcing(le, li)

    X = np.empty((n + 1, d))
    X[0] = x0
    k = 0
    while k < n:
        tk = t[k]
        nxt = next((e for e in events if e > tk + eps), math.inf)
        m = n - k if nxt == math.inf else min(n - k, int(math.floor((nxt - tk) / dt + 1e-9)))
        u = forcing(tk)
        if m >= 1:
            X[k : k + m + 1] = stepper.run(X[k], u, dt, m)
            k += m
            continue
        # one or more switching times fall strictly inside this step
        x, tc = X[k], tk
        inner = [e for e in events if tk + eps < e < tk + dt - eps] + [t[k + 1]]
        for te in inner:
            x = stepper.run(x, forcing(tc), te - tc, 1)[-1]
            tc = te
        X[k + 1] = x
        k += 1

    U = np.empty((n + 1, d))
    LE = np.empty((n + 1, cl.reduced.J_red.shape[0]))
    LI = np.empty((n + 1, cl.reduced.J_int.shape[0]))
    for i, ti in enumerate(t):
        le, li = _load_vectors(cl, loads, ti + eps)
        LE[i], LI[i] = le, li
        U[i] = cl.forcing(le, li)
    V_ext, V_int, omega, PQ_ext, S_int = _snapshot(cl, X, U, LE, LI)
    return Trajectory(t, X, U, V_ext, V_int, omega, PQ_ext, S_int, cl, method)


def relative_difference(a, b):
    """``max |a - b| / max |a|`` over all samples and coordinates."""
    scale = max(float(np.abs(a).max()), np.finfo(float).tiny)
    return float(np.abs(a - b).max() / scale)


# -- steady state -------------------------------------------------------------


@dataclass
class SteadyState:
    omega_common: float
    x_perp: np.ndarray
    alpha: float
    xi0: np.ndarray
    residual: float
    u: np.ndarray


def steady_state(cl, loads, tol_zero=DEFAULT_TOL_ZERO):
    """Common frequency drift and the stationary off-drift state under constant loads.

    The trajectory tends to ``alpha * t * xi0 + x_perp``.
    """
    ns = nullspace(cl, tol_zero)
    if ns.dim != 1:
        raise NotStable(f"steady state needs a one-dimensional nullspace, found {ns.dim}")
    A = cl.J_cl_red
    le, li = _load_vectors(cl, loads)
    u = cl.forcing(le, li)
    xi0 = cl.layout.balanced()
    xi0 /= np.linalg.norm(xi0)
    if cl.symmetric:
        w = xi0
    else:
        w = sla.null_space(A.T, rcond=tol_zero)[:, 0]
    alpha = float(w @ u / (w @ xi0))
    rhs = alpha * xi0 - u
    x_perp = np.linalg.lstsq(A, rhs, rcond=None)[0]
    x_perp -= xi0 * (xi0 @ x_perp)
    residual = float(np.linalg.norm(A @ x_perp - rhs))
    scale = max(1.0, float(np.linalg.norm(u)))
    if residual > 1e-9 * scale:
        raise NotStable(f"steady-state residual {residual:.2e} too large")
    omega = alpha * float(xi0[cl.layout.angle_index[0]])
    return SteadyState(omega, x_perp, alpha, xi0, residual, u)


def steady_trajectory(cl, loads, ss=None):
    """One-sample trajectory at the stationary off-drift state."""
    ss = steady_state(cl, loads) if ss is None else ss
    le, li = _load_vectors(cl, loads)
    X = ss.x_perp[None, :]
    U = ss.u[None, :]
    V_ext, V_int, omega, PQ_ext, S_int = _snapshot(cl, X, U, le[None, :], li[None, :])
    return Trajectory(np.zeros(1), X, U, V_ext, V_int, omega, PQ_ext, S_int, cl, "steady")


# -- unbalance metrics ---------------------------------------------------------


@dataclass
class UnbalanceReport:
    bus: str
    t: np.ndarray
    V_UF: np.ndarray
    P_UF: np.ndarray
    Q_UF: np.ndarray
    V_UF_N: np.ndarray
    flagged: np.ndarray


def unbalance_factors(traj, bus, backend=None):
    if traj.closed_loop.model.node(bus).phase_count != 3:
        raise ModelError(f"unbalance factors need a three-phase bus, {bus} is single-phase")
    theta, v = traj.node_voltage(bus)
    P, Q = traj.node_power(bus)
    vuf, puf, quf, vufn, flagged = _kernels.unbalance_series(theta, v, P, Q, backend)
    return UnbalanceReport(bus, traj.t, vuf, puf, quf, vufn, flagged)


# -- sweeps --------------------------------------------------------------------


def with_kbal(specs, k_bal):
    """Copy of ``specs`` with every generalized-droop converter set to ``k_bal``."""
    return [
        dataclasses.replace(s, k_bal=float(k_bal)) if s.law is DroopLaw.GeneralizedDroop else s
        for s in specs
    ]


def sweep(red, specs, sweep_bus, monitor_bus, kbals, levels, base_loads=(), **cl_kwargs):
    """Steady-state unbalance at ``monitor_bus`` over an a-c load sweep at ``sweep_bus``.

    Rows come back ordered by ``(k_bal, level)``.
    """
    rows = []
    for k in kbals:
        cl = assemble_closed_loop(red, with_kbal(specs, k), **cl_kwargs)
        for level in levels:
            loads = list(base_loads) + [delta_ac_load(sweep_bus, level)]
            ss = steady_state(cl, loads)
            rep = unbalance_factors(steady_trajectory(cl, loads, ss), monitor_bus)
            rows.append(
                {
                    "k_bal": float(k),
                    "load": float(level),
                    "omega_common": ss.omega_common,
                    "V_UF": float(rep.V_UF[0]),
                    "P_UF": float(rep.P_UF[0]),
                    "Q_UF": float(rep.Q_UF[0]),
                    "V_UF_N": float(rep.V_UF_N[0]),
                }
            )
    return rows


@dataclass
class CorrelationResult:
    pairs: np.ndarray
    coefficient: float | None
    zero_consistent: bool


def correlation_study(rows, zero_tol=1e-10):
    """Paired ``(V_UF, V_UF_N)`` values and their sample correlation.

    The coefficient is ``None`` when either column has zero variance.
    """
    if len(rows) < 2:
        raise ValueError("correlation needs at least two sweep points")
    pairs = np.array([[r["V_UF"], r["V_UF_N"]] for r in rows], dtype=float)
    a, b = pairs[:, 0], pairs[:, 1]
    coef = None
    if np.std(a) > 0 and np.std(b) > 0:
        coef = float(np.corrcoef(a, b)[0, 1])
    zero_consistent = bool(np.all((a < zero_tol) == (b < zero_tol)))
    return CorrelationResult(pairs, coef, zero_consistent)

"""Inner loops of the simulator, compiled with numba when available.

Set ``GFMNET_DISABLE_JIT=1`` to force the pure-numpy versions. Both backends
compute the same arithmetic; the flag only trades start-up time for speed.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_REQUESTED = os.environ.get("GFMNET_DISABLE_JIT", "").strip().lower() in ("", "0", "false", "no")
JIT_ENABLED = numba is not None and JIT_REQUESTED


# -- numpy reference versions --------------------------------------------------


def affine_steps_np(Phi, c, x0, n):
    out = np.empty((n + 1, x0.shape[0]))
    out[0] = x0
    for k in range(n):
        out[k + 1] = Phi @ out[k] + c
    return out


def rk4_steps_np(A, u, x0, h, n):
    out = np.empty((n + 1, x0.shape[0]))
    out[0] = x0
    for k in range(n):
        x = out[k]
        k1 = A @ x + u
        k2 = A @ (x + 0.5 * h * k1) + u
        k3 = A @ (x + 0.5 * h * k2) + u
        k4 = A @ (x + h * k3) + u
        out[k + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


_A = np.exp(2j * np.pi / 3.0)
_NOMINAL = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0])


def unbalance_series_np(theta, v, P, Q):
    """Per-sample unbalance factors for one three-phase bus.

    Inputs are ``(n_samples, 3)`` deviation arrays. Returns ``V_UF, P_UF,
    Q_UF, V_UF_N`` and a flag array marking samples whose positive-sequence
    magnitude vanished (their ``V_UF`` is NaN).
    """
    V = (1.0 + v) * np.exp(1j * (_NOMINAL + theta))
    neg = np.abs(V[:, 0] + _A * _A * V[:, 1] + _A * V[:, 2])
    pos = np.abs(V[:, 0] + _A * V[:, 1] + _A * _A * V[:, 2])
    flagged = pos < 1e-12
    vuf = np.where(flagged, np.nan, neg / np.where(flagged, 1.0, pos))
    puf = np.linalg.norm(P - P[:, :1], axis=1) / 3.0
    quf = np.linalg.norm(Q - Q[:, :1], axis=1) / 3.0
    dv = v - v[:, :1]
    dth = theta - theta[:, :1]
    vufn = np.sqrt((dv**2).sum(axis=1) + (dth**2).sum(axis=1)) / 3.0
    return vuf, puf, quf, vufn, flagged


# -- compiled versions ---------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def affine_steps_nb(Phi, c, x0, n):
        d = x0.shape[0]
        out = np.empty((n + 1, d))
        out[0] = x0
        for k in range(n):
            for i in range(d):
                acc = c[i]
                for j in range(d):
                    acc += Phi[i, j] * out[k, j]
                out[k + 1, i] = acc
        return out

    @numba.njit(cache=True)
    def _matvec_plus(A, x, u):
        d = x.shape[0]
        y = np.empty(d)
        for i in range(d):
            acc = u[i]
            for j in range(d):
                acc += A[i, j] * x[j]
            y[i] = acc
        return y

    @numba.njit(cache=True)
    def rk4_steps_nb(A, u, x0, h, n):
        d = x0.shape[0]
        out = np.empty((n + 1, d))
        out[0] = x0
        for k in range(n):
            x = out[k]
            k1 = _matvec_plus(A, x, u)
            k2 = _matvec_plus(A, x + 0.5 * h * k1, u)
            k3 = _matvec_plus(A, x + 0.5 * h * k2, u)
            k4 = _matvec_plus(A, x + h * k3, u)
            for i in range(d):
                out[k + 1, i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        return out

    @numba.njit(cache=True)
    def unbalance_series_nb(theta, v, P, Q):
        n = theta.shape[0]
        a = np.exp(2j * np.pi / 3.0)
        a2 = a * a
        nominal = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0])
        vuf = np.empty(n)
        puf = np.empty(n)
        quf = np.empty(n)
        vufn = np.empty(n)
        flagged = np.zeros(n, dtype=np.bool_)
        for s in range(n):
            V0 = (1.0 + v[s, 0]) * np.exp(1j * (nominal[0] + theta[s, 0]))
            V1 = (1.0 + v[s, 1]) * np.exp(1j * (nominal[1] + theta[s, 1]))
            V2 = (1.0 + v[s, 2]) * np.exp(1j * (nominal[2] + theta[s, 2]))
            neg = abs(V0 + a2 * V1 + a * V2)
            pos = abs(V0 + a * V1 + a2 * V2)
            if pos < 1e-12:
                flagged[s] = True
                vuf[s] = np.nan
            else:
                vuf[s] = neg / pos
            sp = 0.0
            sq = 0.0
            sn = 0.0
            for p in range(3):
                sp += (P[s, p] - P[s, 0]) ** 2
                sq += (Q[s, p] - Q[s, 0]) ** 2
                sn += (v[s, p] - v[s, 0]) ** 2 + (theta[s, p] - theta[s, 0]) ** 2
            puf[s] = np.sqrt(sp) / 3.0
            quf[s] = np.sqrt(sq) / 3.0
            vufn[s] = np.sqrt(sn) / 3.0
        return vuf, puf, quf, vufn, flagged

else:  # pragma: no cover
    affine_steps_nb = rk4_steps_nb = unbalance_series_nb = None


_BACKENDS = {
    "numpy": (affine_steps_np, rk4_steps_np, unbalance_series_np),
    "numba": (affine_steps_nb, rk4_steps_nb, unbalance_series_nb),
}


def backend(name=None):
    """Kernel triple ``(affine_steps, rk4_steps, unbalance_series)``.

    ``name=None`` picks numba unless it is missing or disabled.
    """
    if name is None:
        name = "numba" if JIT_ENABLED else "numpy"
    if name == "numba" and numba is None:
        raise RuntimeError("numba backend requested but numba is not installed")
    return _BACKENDS[name]


def active_backend():
    return "numba" if JIT_ENABLED else "numpy"


def _as_args(*arrays):
    return tuple(np.ascontiguousarray(a, dtype=float) for a in arrays)


def affine_steps(Phi, c, x0, n, name=None):
    return backend(name)[0](*_as_args(Phi, c, x0), int(n))


def rk4_steps(A, u, x0, h, n, name=None):
    A, u, x0 = _as_args(A, u, x0)
    return backend(name)[1](A, u, x0, float(h), int(n))


def unbalance_series(theta, v, P, Q, name=None):
    return backend(name)[2](*_as_args(theta, v, P, Q))

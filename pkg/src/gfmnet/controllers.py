"""Grid-forming droop laws and the matrices they contribute to the closed loop."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, NonConformingGains

GAIN_REL_TOL = 1e-9


class DroopLaw(str, enum.Enum):
    SinglePhaseDroop = "SinglePhaseDroop"
    PositiveSequenceDroop = "PositiveSequenceDroop"
    GeneralizedDroop = "GeneralizedDroop"

    def __str__(self):
        return self.value

    @property
    def phase_count(self):
        return 1 if self is DroopLaw.SinglePhaseDroop else 3


@dataclass(frozen=True)
class ControllerSpec:
    node: str
    law: DroopLaw
    m_d: float
    tau: float
    k_bal: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "law", DroopLaw(self.law))
        if not self.m_d > 0:
            raise ModelError(f"converter at {self.node}: m_d must be positive")
        if not self.tau > 0:
            raise ModelError(f"converter at {self.node}: tau must be positive")
        if not self.k_bal >= 0:
            raise ModelError(f"converter at {self.node}: k_bal must be nonnegative")
        if self.k_bal and self.law is not DroopLaw.GeneralizedDroop:
            raise ModelError(f"converter at {self.node}: k_bal only applies to GeneralizedDroop")


def normalize_gains(m_p, m_q, tau):
    """Return ``m_d`` for gains satisfying ``m_p == m_q / tau``."""
    if min(m_p, m_q, tau) <= 0:
        raise ModelError("droop gains and tau must be positive")
    ratio = m_q / tau
    if abs(m_p - ratio) > GAIN_REL_TOL * max(abs(m_p), abs(ratio)):
        raise NonConformingGains(
            f"m_p = {m_p!r} but m_q / tau = {ratio!r}; the normalized model needs m_p = m_q / tau"
        )
    return float(m_p)


# Laplacian of the directed 3-cycle scaled by 1/2.
_BAL = 0.5 * np.array([[1.0, 0.0, -1.0], [-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]])


@dataclass(frozen=True)
class ControlMatrices:
    E: np.ndarray
    F: np.ndarray
    S: np.ndarray | None
    local_term: np.ndarray

    @property
    def state_dim(self):
        return self.E.shape[1]


def control_matrices(spec):
    n = spec.law.phase_count
    F = np.vstack([np.zeros((n, n)), np.eye(n)])
    if spec.law is DroopLaw.PositiveSequenceDroop:
        E = np.kron(np.eye(2), np.ones((3, 1)))
        # (gamma, vartheta) coordinates: the voltage state relaxes with 1/tau.
        return ControlMatrices(E, F, None, np.diag([0.0, 1.0 / spec.tau]))
    E = np.eye(2 * n)
    local = F @ F.T / spec.tau
    S = None
    if spec.law is DroopLaw.GeneralizedDroop:
        S = np.kron(np.eye(2), _BAL)
        local = local + spec.k_bal * (S @ S.T)
    return ControlMatrices(E, F, S, local)


@dataclass(frozen=True)
class StateBlock:
    node: str
    law: DroopLaw
    offset: int
    dim: int
    spec: ControllerSpec

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.dim)

    @property
    def angle_dim(self):
        return self.dim // 2

    @property
    def angle_slice(self):
        return slice(self.offset, self.offset + self.angle_dim)


@dataclass(frozen=True)
class StateLayout:
    blocks: tuple

    @property
    def dim(self):
        return sum(b.dim for b in self.blocks)

    @property
    def dims(self):
        return tuple(b.dim for b in self.blocks)

    def block(self, node):
        return next(b for b in self.blocks if b.node == node)

    @property
    def angle_index(self):
        return np.concatenate([np.arange(b.offset, b.offset + b.angle_dim) for b in self.blocks])

    def balanced(self):
        """Stacked balanced state: ones on every angle coordinate."""
        xi = np.zeros(self.dim)
        xi[self.angle_index] = 1.0
        return xi


def state_layout(specs, model=None):
    """Order converter states by exterior node order (or spec order without a model)."""
    specs = list(specs)
    by_node = {}
    for s in specs:
        if s.node in by_node:
            raise ModelError(f"node {s.node} carries more than one converter")
        by_node[s.node] = s
    if model is None:
        order = [s.node for s in specs]
    else:
        for s in specs:
            if s.node not in model._index:
                raise ModelError(f"converter references unknown node {s.node!r}")
            node = model.node(s.node)
            if not node.exterior:
                raise ModelError(f"converter on interior node {s.node}")
            if node.phase_count != s.law.phase_count:
                raise ModelError(
                    f"{s.law} needs a {s.law.phase_count}-phase node, {s.node} has {node.phase_count}"
                )
        order = model.exterior_ids
        missing = [n for n in order if n not in by_node]
        if missing:
            raise ModelError(f"exterior nodes without a converter: {missing}")
    blocks, off = [], 0
    for node in order:
        s = by_node[node]
        dim = 2 if s.law is not DroopLaw.GeneralizedDroop else 6
        blocks.append(StateBlock(node, s.law, off, dim, s))
        off += dim
    return StateLayout(tuple(blocks))

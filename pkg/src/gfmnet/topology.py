"""Mixed three-phase / single-phase network graph and its well-posedness checks."""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

from .branches import PHASES, SYNC_KINDS, TRANSFORMER_KINDS, BranchKind
from .errors import ModelError

EXTERIOR = "exterior"
INTERIOR = "interior"

# Kinds whose two terminals carry identical blocks; their orientation is a
# labelling choice, so witness paths may cross them either way.
SYMMETRIC_SYNC_KINDS = frozenset({BranchKind.YgYg, BranchKind.Line3})


@dataclass(frozen=True)
class NodeSpec:
    id: str
    phase_count: int
    role: str = INTERIOR

    def __post_init__(self):
        if self.phase_count not in (1, 3):
            raise ModelError(f"node {self.id}: phase_count must be 1 or 3, got {self.phase_count}")
        if self.role not in (EXTERIOR, INTERIOR):
            raise ModelError(f"node {self.id}: role must be 'exterior' or 'interior', got {self.role!r}")

    @property
    def exterior(self):
        return self.role == EXTERIOR


@dataclass(frozen=True)
class BranchSpec:
    from_node: str
    to_node: str
    kind: BranchKind
    susceptance_b: float
    phase_incidence: str | None = None
    voltage_ratio_tag: str = "1"

    def __post_init__(self):
        object.__setattr__(self, "kind", BranchKind(self.kind))
        if not self.susceptance_b > 0:
            raise ModelError(
                f"branch {self.from_node}->{self.to_node}: susceptance must be positive, "
                f"got {self.susceptance_b}"
            )
        if self.phase_incidence is not None and self.phase_incidence not in PHASES:
            raise ModelError(
                f"branch {self.from_node}->{self.to_node}: phase must be one of {PHASES}"
            )

    @property
    def label(self):
        return f"{self.from_node}->{self.to_node} ({self.kind})"


@dataclass(frozen=True)
class NetworkModel:
    """Immutable network description; branch order fixes the incidence-matrix columns."""

    nodes: tuple[NodeSpec, ...]
    branches: tuple[BranchSpec, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "branches", tuple(self.branches))
        index = {}
        for pos, node in enumerate(self.nodes):
            if node.id in index:
                raise ModelError(f"duplicate node id {node.id!r}")
            index[node.id] = pos
        object.__setattr__(self, "_index", index)
        for br in self.branches:
            self._check_branch(br)

    def _check_branch(self, br):
        for end in (br.from_node, br.to_node):
            if end not in self._index:
                raise ModelError(f"branch {br.label} references unknown node {end!r}")
        if br.from_node == br.to_node:
            raise ModelError(f"branch {br.label} is a self loop")
        ni = self.node(br.from_node).phase_count
        nk = self.node(br.to_node).phase_count
        if br.kind is BranchKind.Single:
            if ni != 1:
                raise ModelError(f"branch {br.label}: Single branches start at a 1-phase node")
            if nk == 3 and br.phase_incidence is None:
                raise ModelError(f"branch {br.label}: phase required when landing on a 3-phase node")
            if nk == 1 and br.phase_incidence is not None:
                raise ModelError(f"branch {br.label}: phase given for a 1-phase to 1-phase branch")
        else:
            if ni != 3 or nk != 3:
                raise ModelError(f"branch {br.label}: {br.kind} connects two 3-phase nodes")
            if br.phase_incidence is not None:
                raise ModelError(f"branch {br.label}: phase only applies to Single branches")

    def node(self, node_id):
        return self.nodes[self._index[node_id]]

    def position(self, node_id):
        return self._index[node_id]

    @property
    def exterior_ids(self):
        return [n.id for n in self.nodes if n.exterior]

    @property
    def interior_ids(self):
        return [n.id for n in self.nodes if not n.exterior]

    def neighbours(self):
        """Undirected adjacency: node id -> list of (other id, branch index)."""
        adj = {n.id: [] for n in self.nodes}
        for l, br in enumerate(self.branches):
            adj[br.from_node].append((br.to_node, l))
            adj[br.to_node].append((br.from_node, l))
        return adj


# -- individual checks -------------------------------------------------------


def sync_edges(model):
    """Indices of branches in the sync set (YgYg, Line3, YgD, Single)."""
    return {l for l, br in enumerate(model.branches) if br.kind in SYNC_KINDS}


def _sync_successors(model):
    succ = {n.id: [] for n in model.nodes}
    for l, br in enumerate(model.branches):
        if br.kind not in SYNC_KINDS:
            continue
        succ[br.from_node].append((br.to_node, l))
        if br.kind in SYMMETRIC_SYNC_KINDS or (
            br.kind is BranchKind.Single and model.node(br.to_node).phase_count == 1
        ):
            succ[br.to_node].append((br.from_node, l))
    return succ


@dataclass
class ConnectivityResult:
    connected: bool
    witnesses: dict
    violators: list

    def __bool__(self):
        return self.connected


def is_interior_exterior_connected(model):
    """Breadth-first search from every interior node to an exterior node over sync edges.

    Transformers are only crossed primary -> secondary. Any exterior node,
    single- or three-phase, ends a witness path.
    """
    succ = _sync_successors(model)
    witnesses, violators = {}, []
    for start in model.interior_ids:
        parent = {start: None}
        queue = deque([start])
        found = None
        while queue:
            u = queue.popleft()
            if model.node(u).exterior:
                found = u
                break
            for v, _ in succ[u]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        if found is None:
            violators.append(start)
            continue
        path = [found]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        witnesses[start] = path[::-1]
    return ConnectivityResult(not violators, witnesses, violators)


def _components(node_ids, edges):
    adj = {n: [] for n in node_ids}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen, comps = set(), []
    for n in node_ids:
        if n in seen:
            continue
        comp, stack = [], [n]
        seen.add(n)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        comps.append(comp)
    return comps


def is_connected(model):
    edges = [(br.from_node, br.to_node) for br in model.branches]
    return len(_components([n.id for n in model.nodes], edges)) <= 1


def parallel_branches(model):
    """Node pairs joined by more than one branch."""
    pairs = Counter(frozenset((br.from_node, br.to_node)) for br in model.branches)
    return sorted(tuple(sorted(p)) for p, c in pairs.items() if c > 1)


@dataclass
class ConsistencyResult:
    passed: bool
    cycle: list | None = None
    labels: dict | None = None

    def __bool__(self):
        return self.passed


def _transformer_key(br):
    return (br.kind.value, br.voltage_ratio_tag)


def check_path_consistency(model):
    """Transformer counts along any two paths between 3-phase nodes must agree.

    Each 3-phase node gets the signed count vector of (kind, ratio tag)
    transformers on its spanning-tree path from a root; a transformer crossed
    primary -> secondary counts +1, the other way -1. A non-tree edge whose
    endpoint labels do not differ by exactly that edge's own contribution
    closes an inconsistent cycle.
    """
    three = [n.id for n in model.nodes if n.phase_count == 3]
    edges3 = [(l, br) for l, br in enumerate(model.branches) if br.kind is not BranchKind.Single]
    adj = {n: [] for n in three}
    for l, br in edges3:
        adj[br.from_node].append((br.to_node, l, +1))
        adj[br.to_node].append((br.from_node, l, -1))

    labels, parent = {}, {}
    tree_edges = set()
    for root in three:
        if root in labels:
            continue
        labels[root] = Counter()
        parent[root] = None
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, l, sign in adj[u]:
                if v in labels:
                    continue
                lab = Counter(labels[u])
                br = model.branches[l]
                if br.kind in TRANSFORMER_KINDS:
                    lab[_transformer_key(br)] += sign
                labels[v] = lab
                parent[v] = (u, l)
                tree_edges.add(l)
                queue.append(v)

    def clean(c):
        return {k: v for k, v in c.items() if v != 0}

    for l, br in edges3:
        if l in tree_edges:
            continue
        expected = Counter(labels[br.from_node])
        if br.kind in TRANSFORMER_KINDS:
            expected[_transformer_key(br)] += 1
        if clean(expected) != clean(labels[br.to_node]):
            return ConsistencyResult(False, _tree_cycle(parent, br), {k: clean(v) for k, v in labels.items()})
    return ConsistencyResult(True, None, {k: clean(v) for k, v in labels.items()})


def _tree_cycle(parent, br):
    def to_root(n):
        path = [n]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]][0])
        return path

    a, b = to_root(br.from_node), to_root(br.to_node)
    common = next(n for n in a if n in set(b))
    left = a[: a.index(common) + 1]
    right = b[: b.index(common)]
    return left + right[::-1]


@dataclass
class BridgeResult:
    passed: bool
    path: list | None = None

    def __bool__(self):
        return self.passed


def check_no_1phi_bridge(model):
    """No path made only of Single branches may join two distinct 3-phase nodes."""
    single = [(br.from_node, br.to_node) for br in model.branches if br.kind is BranchKind.Single]
    if not single:
        return BridgeResult(True)
    involved = sorted({n for e in single for n in e}, key=model.position)
    adj = {n: [] for n in involved}
    for u, v in single:
        adj[u].append(v)
        adj[v].append(u)
    for comp in _components(involved, single):
        three = [n for n in comp if model.node(n).phase_count == 3]
        if len(three) < 2:
            continue
        src, dst = three[0], three[1]
        prev = {src: None}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            if u == dst:
                break
            for v in adj[u]:
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        path = [dst]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return BridgeResult(False, path[::-1])
    return BridgeResult(True)


# -- aggregate report --------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: object = None


@dataclass
class WellPosednessReport:
    checks: list
    warnings: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def check(self, name):
        return next(c for c in self.checks if c.name == name)

    def as_dict(self):
        return {
            "passed": self.passed,
            "checks": {c.name: {"passed": c.passed, "detail": c.detail} for c in self.checks},
            "warnings": list(self.warnings),
        }


def validate(model):
    """Run every well-posedness check and collect the results.

    Matrix assembly refuses models whose report does not pass.
    """
    warnings = []
    par = parallel_branches(model)
    simple = Check("simple", not par, {"parallel": [list(p) for p in par]} if par else None)
    conn = Check("connected", is_connected(model))
    iec = is_interior_exterior_connected(model)
    iec_check = Check(
        "interior_exterior_connected",
        iec.connected,
        {"witnesses": iec.witnesses} if iec.connected else {"violators": iec.violators},
    )
    pc = check_path_consistency(model)
    pc_check = Check("path_consistency", pc.passed, None if pc.passed else {"cycle": pc.cycle})
    br = check_no_1phi_bridge(model)
    br_check = Check("no_single_phase_bridge", br.passed, None if br.passed else {"path": br.path})
    if not model.exterior_ids:
        warnings.append("no converters: model has no exterior nodes")
    if any(
        model.node(w[-1]).phase_count == 1 and len(w) > 1 for w in iec.witnesses.values()
    ):
        warnings.append("some witness paths end at a single-phase exterior node")
    return WellPosednessReport([simple, conn, iec_check, pc_check, br_check], warnings)

"""Reader and writer for ``.net`` network documents.

Grammar (UTF-8, line oriented)::

    document    := description? section*
    description := ("#" text NEWLINE)*          leading comment block, kept
    section     := "[" name "]" NEWLINE entry*
    entry       := token (WS token)* NEWLINE
    token       := key "=" value                 value has no whitespace

Sections are ``nodes``, ``branches``, ``converters``, ``loads`` and
``analysis``. Blank lines and ``#`` lines after the description are ignored.
In ``analysis`` each line holds one or more settings. Lists are comma
separated; a load sweep may also be written ``start:stop:step``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .branches import BranchKind
from .controllers import ControllerSpec, DroopLaw, normalize_gains
from .errors import DocumentError, GfmError
from .simulate import LoadStep
from .topology import BranchSpec, NetworkModel, NodeSpec

SECTIONS = ("nodes", "branches", "converters", "loads", "analysis")

_KEYS = {
    "nodes": ("id", "phases", "role"),
    "branches": ("from", "to", "kind", "b", "phase", "ratio"),
    "converters": ("node", "law", "m_d", "m_p", "m_q", "tau", "k_bal"),
    "loads": ("node", "dP", "dQ", "t_start"),
    "analysis": (
        "t_end",
        "dt",
        "kbal_sweep",
        "load_sweep",
        "sweep_bus",
        "monitor_bus",
        "tol_rank",
        "tol_zero_eig",
    ),
}
_REQUIRED = {
    "nodes": ("id", "phases"),
    "branches": ("from", "to", "kind", "b"),
    "converters": ("node", "law", "tau"),
    "loads": ("node", "dP"),
}


@dataclass(frozen=True)
class LoadRange:
    start: float
    stop: float
    step: float

    def levels(self):
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return tuple(float(v) for v in np.round(self.start + self.step * np.arange(n), 12))

    def __str__(self):
        return f"{self.start!r}:{self.stop!r}:{self.step!r}"


@dataclass(frozen=True)
class AnalysisSettings:
    t_end: float | None = None
    dt: float | None = None
    kbal_sweep: tuple | None = None
    load_sweep: object = None
    sweep_bus: str | None = None
    monitor_bus: str | None = None
    tol_rank: float | None = None
    tol_zero_eig: float | None = None

    def load_levels(self):
        if self.load_sweep is None:
            return None
        if isinstance(self.load_sweep, LoadRange):
            return self.load_sweep.levels()
        return tuple(self.load_sweep)


@dataclass(frozen=True)
class NetworkDocument:
    model: NetworkModel
    converters: tuple = ()
    loads: tuple = ()
    analysis: AnalysisSettings = AnalysisSettings()
    description: tuple = ()
    warnings: tuple = field(default=(), compare=False)

    def converter(self, node):
        return next(c for c in self.converters if c.node == node)


# -- parsing -------------------------------------------------------------------


class _Entry:
    def __init__(self, lineno, tokens):
        self.lineno = lineno
        self.tokens = tokens  # key -> (value, column)

    def col(self, key):
        return self.tokens[key][1] if key in self.tokens else None

    def get(self, key, default=None):
        return self.tokens[key][0] if key in self.tokens else default


def _tokenize(line, lineno):
    tokens = {}
    pos = 0
    for raw in line.split():
        col = line.index(raw, pos) + 1
        pos = col - 1 + len(raw)
        if "=" not in raw:
            raise DocumentError(f"expected key=value, got {raw!r}", lineno, col)
        key, value = raw.split("=", 1)
        if not key or not value:
            raise DocumentError(f"empty key or value in {raw!r}", lineno, col)
        if key in tokens:
            raise DocumentError(f"duplicate key {key!r}", lineno, col)
        tokens[key] = (value, col)
    return tokens


def _float(entry, key, positive=False, default=None):
    raw = entry.get(key)
    if raw is None:
        return default
    try:
        val = float(raw)
    except ValueError:
        raise DocumentError(f"{key}: not a number: {raw!r}", entry.lineno, entry.col(key)) from None
    if not math.isfinite(val):
        raise DocumentError(f"{key}: value must be finite", entry.lineno, entry.col(key))
    if positive and not val > 0:
        raise DocumentError(f"{key}: value must be positive", entry.lineno, entry.col(key))
    return val


def _floats(entry, key):
    raw = entry.get(key)
    try:
        vals = tuple(float(x) for x in raw.split(","))
    except ValueError:
        raise DocumentError(f"{key}: expected comma-separated numbers", entry.lineno, entry.col(key)) from None
    if not all(math.isfinite(v) for v in vals):
        raise DocumentError(f"{key}: values must be finite", entry.lineno, entry.col(key))
    return vals


def _enum(entry, key, enum_cls):
    raw = entry.get(key)
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise DocumentError(
            f"{key}: unknown value {raw!r} (expected one of {allowed})", entry.lineno, entry.col(key)
        ) from None


def _split_sections(text, strict, warnings):
    description, sections = [], {}
    current = None
    in_header = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if in_header and stripped.startswith("#"):
            description.append(stripped[1:].strip())
            continue
        in_header = False
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise DocumentError("unterminated section header", lineno, len(line) + 1)
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                raise DocumentError(f"unknown section [{name}]", lineno, line.index("[") + 1)
            if name in sections:
                raise DocumentError(f"section [{name}] appears twice", lineno, 1)
            current = name
            sections[name] = []
            continue
        if current is None:
            raise DocumentError("entry outside any section", lineno, 1)
        tokens = _tokenize(line, lineno)
        for key in list(tokens):
            if key not in _KEYS[current]:
                msg = f"unknown key {key!r} in [{current}]"
                if strict:
                    raise DocumentError(msg, lineno, tokens[key][1])
                warnings.append(f"line {lineno}: {msg} (ignored)")
                del tokens[key]
        entry = _Entry(lineno, tokens)
        for key in _REQUIRED.get(current, ()):
            if key not in tokens:
                raise DocumentError(f"[{current}] entry is missing {key!r}", lineno, 1)
        sections[current].append(entry)
    return tuple(description), sections


def _semantic(message, entry=None, key=None):
    if entry is None:
        return DocumentError(message, kind="semantic")
    return DocumentError(message, entry.lineno, entry.col(key), kind="semantic")


def _build_nodes(entries):
    nodes = []
    for e in entries:
        phases = e.get("phases")
        if phases not in ("1", "3"):
            raise DocumentError("phases must be 1 or 3", e.lineno, e.col("phases"))
        role = e.get("role", "interior")
        if role not in ("interior", "exterior"):
            raise DocumentError("role must be interior or exterior", e.lineno, e.col("role"))
        nodes.append(NodeSpec(e.get("id"), int(phases), role))
    return nodes


def _build_branches(entries):
    out = []
    for e in entries:
        kind = _enum(e, "kind", BranchKind)
        b = _float(e, "b", positive=True)
        out.append(BranchSpec(e.get("from"), e.get("to"), kind, b, e.get("phase"), e.get("ratio", "1")))
    return out


def _build_converters(entries):
    out = []
    for e in entries:
        law = _enum(e, "law", DroopLaw)
        tau = _float(e, "tau", positive=True)
        if "m_d" in e.tokens:
            if "m_p" in e.tokens or "m_q" in e.tokens:
                raise _semantic("give either m_d or m_p/m_q, not both", e, "m_d")
            m_d = _float(e, "m_d", positive=True)
        elif "m_p" in e.tokens and "m_q" in e.tokens:
            try:
                m_d = normalize_gains(_float(e, "m_p"), _float(e, "m_q"), tau)
            except GfmError as exc:
                raise _semantic(f"converter at {e.get('node')}: {exc}", e, "m_p") from None
        else:
            raise _semantic("converter needs m_d or both m_p and m_q", e, "law")
        k_bal = _float(e, "k_bal", default=0.0)
        out.append(ControllerSpec(e.get("node"), law, m_d, tau, k_bal))
    return out


def _build_loads(entries):
    out = []
    for e in entries:
        dP = _floats(e, "dP")
        dQ = _floats(e, "dQ") if "dQ" in e.tokens else (0.0,) * len(dP)
        out.append(LoadStep(e.get("node"), dP, dQ, _float(e, "t_start", default=0.0)))
    return out


def _build_analysis(entries):
    vals = {}
    for e in entries:
        for key in e.tokens:
            if key in vals:
                raise DocumentError(f"analysis setting {key!r} given twice", e.lineno, e.col(key))
            if key in ("t_end", "dt", "tol_rank", "tol_zero_eig"):
                vals[key] = _float(e, key, positive=True)
            elif key == "kbal_sweep":
                vals[key] = _floats(e, key)
            elif key == "load_sweep":
                raw = e.get(key)
                if ":" in raw:
                    parts = raw.split(":")
                    try:
                        start, stop, step = (float(p) for p in parts)
                    except ValueError:
                        raise DocumentError("load_sweep range must be start:stop:step", e.lineno, e.col(key)) from None
                    if not step > 0 or stop < start:
                        raise DocumentError("load_sweep range needs step > 0 and stop >= start", e.lineno, e.col(key))
                    vals[key] = LoadRange(start, stop, step)
                else:
                    vals[key] = _floats(e, key)
            else:
                vals[key] = e.get(key)
    return AnalysisSettings(**vals)


def parse(text, *, strict=True):
    """Parse a document into a ``NetworkDocument``.

    Raises ``DocumentError`` with ``kind="syntax"`` for malformed text and
    ``kind="semantic"`` for well-formed text describing an invalid network.
    """
    warnings = []
    description, sections = _split_sections(text, strict, warnings)
    node_entries = sections.get("nodes", [])
    if not node_entries:
        raise _semantic("no nodes")
    nodes = _build_nodes(node_entries)
    branches = _build_branches(sections.get("branches", []))
    try:
        model = NetworkModel(nodes, branches)
    except GfmError as exc:
        raise _semantic(str(exc)) from None
    try:
        converters = _build_converters(sections.get("converters", []))
        loads = _build_loads(sections.get("loads", []))
    except DocumentError:
        raise
    except GfmError as exc:
        raise _semantic(str(exc)) from None
    seen = set()
    for c in converters:
        if c.node not in model._index:
            raise _semantic(f"converter references unknown node {c.node!r}")
        if c.node in seen:
            raise _semantic(f"node {c.node} carries more than one converter")
        seen.add(c.node)
        node = model.node(c.node)
        if node.phase_count != c.law.phase_count:
            raise _semantic(f"{c.law} cannot sit on {node.phase_count}-phase node {c.node}")
    for node in model.nodes:
        if node.exterior != (node.id in seen):
            what = "has no converter" if node.exterior else "is interior but carries a converter"
            raise _semantic(f"node {node.id} {what}")
    for ld in loads:
        if ld.node not in model._index:
            raise _semantic(f"load references unknown node {ld.node!r}")
        if len(ld.dP) != model.node(ld.node).phase_count:
            raise _semantic(f"load at {ld.node} does not match the node's phase count")
    analysis = _build_analysis(sections.get("analysis", []))
    for key in ("sweep_bus", "monitor_bus"):
        bus = getattr(analysis, key)
        if bus is not None and bus not in model._index:
            raise _semantic(f"{key} references unknown node {bus!r}")
    return NetworkDocument(model, tuple(converters), tuple(loads), analysis, description, tuple(warnings))


def load(path, *, strict=True):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), strict=strict)


# -- serialization -------------------------------------------------------------


def _num(x):
    return repr(float(x))


def _nums(xs):
    return ",".join(_num(x) for x in xs)


def serialize(doc):
    """Canonical text of ``doc``; ``parse(serialize(doc)) == doc``."""
    lines = [f"# {d}" if d else "#" for d in doc.description]
    if lines:
        lines.append("")
    lines.append("[nodes]")
    for n in doc.model.nodes:
        lines.append(f"id={n.id} phases={n.phase_count} role={n.role}")
    lines += ["", "[branches]"]
    for br in doc.model.branches:
        parts = [f"from={br.from_node}", f"to={br.to_node}", f"kind={br.kind.value}", f"b={_num(br.susceptance_b)}"]
        if br.phase_incidence is not None:
            parts.append(f"phase={br.phase_incidence}")
        if br.voltage_ratio_tag != "1":
            parts.append(f"ratio={br.voltage_ratio_tag}")
        lines.append(" ".join(parts))
    if doc.converters:
        lines += ["", "[converters]"]
        for c in doc.converters:
            parts = [f"node={c.node}", f"law={c.law.value}", f"m_d={_num(c.m_d)}", f"tau={_num(c.tau)}"]
            if c.law is DroopLaw.GeneralizedDroop:
                parts.append(f"k_bal={_num(c.k_bal)}")
            lines.append(" ".join(parts))
    if doc.loads:
        lines += ["", "[loads]"]
        for ld in doc.loads:
            lines.append(
                f"node={ld.node} dP={_nums(ld.dP)} dQ={_nums(ld.dQ)} t_start={_num(ld.t_start)}"
            )
    settings = []
    for f in fields(AnalysisSettings):
        val = getattr(doc.analysis, f.name)
        if val is None:
            continue
        if isinstance(val, LoadRange):
            text = str(val)
        elif isinstance(val, tuple):
            text = _nums(val)
        elif isinstance(val, float):
            text = _num(val)
        else:
            text = str(val)
        settings.append(f"{f.name}={text}")
    if settings:
        lines += ["", "[analysis]"] + settings
    return "\n".join(lines) + "\n"

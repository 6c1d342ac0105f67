"""Command-line front end: ``gfmnet <command> FILE [options]``.

Exit codes: 0 success, 1 analysis verdict failure, 2 input error.
Reports are JSON followed by a single ``# metadata:`` footer line; only the
footer carries run-specific data such as the timestamp.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys

import numpy as np

from . import __version__, _kernels
from . import io as netio
from .errors import DocumentError, GfmError, NotStable, RankDeficientInterior, ValidationFailed
from .network import DEFAULT_TOL_RANK, assemble, kron_reduce
from .simulate import (
    DEFAULT_DT,
    DEFAULT_T_END,
    correlation_study,
    simulate,
    sweep,
    unbalance_factors,
    with_kbal,
)
from .stability import DEFAULT_TOL_ZERO, certify
from .topology import validate

EXIT_OK, EXIT_VERDICT, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _emit(body, out):
    out.write(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
    meta = {
        "generated": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "kernels": _kernels.active_backend(),
    }
    out.write("# metadata: " + json.dumps(meta, sort_keys=True) + "\n")


def comparable_section(report_text):
    """Report text without the metadata footer."""
    return "".join(l for l in report_text.splitlines(True) if not l.startswith("# metadata:"))


def _parse_list(text, what):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _parse_levels(text):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError(f"--load range must be start:stop:step, got {text!r}")
        try:
            rng = netio.LoadRange(*(float(p) for p in parts))
        except ValueError:
            raise InputError(f"--load range must be numeric, got {text!r}") from None
        if not rng.step > 0 or rng.stop < rng.start:
            raise InputError("--load range needs step > 0 and stop >= start")
        return rng.levels()
    return _parse_list(text, "--load")


# -- commands ----------------------------------------------------------------


def _load_doc(args):
    return netio.load(args.file, strict=not args.lenient)


def _tols(args, doc):
    tol_rank = args.tol_rank or doc.analysis.tol_rank or DEFAULT_TOL_RANK
    tol_zero = args.tol_zero_eig or doc.analysis.tol_zero_eig or DEFAULT_TOL_ZERO
    return tol_rank, tol_zero


def _specs(args, doc):
    specs = list(doc.converters)
    if getattr(args, "kbal", None) is not None:
        vals = _parse_list(args.kbal, "--kbal")
        if len(vals) != 1:
            raise InputError("--kbal takes a single value for this command")
        specs = with_kbal(specs, vals[0])
    return specs


def cmd_validate(args, out):
    doc = _load_doc(args)
    report = validate(doc.model)
    body = {"command": "validate", "file": os.path.basename(args.file), "report": report.as_dict()}
    body["report"]["document_warnings"] = list(doc.warnings)
    _emit(body, out)
    return EXIT_OK if report.passed else EXIT_VERDICT


def _header(red, group):
    layout = red.ext_layout if group == "ext" else red.int_layout
    return " ".join(f"{nid}@{s.offset}:{s.offset + s.width}" for nid, s in layout.items())


def cmd_matrix(args, out):
    doc = _load_doc(args)
    tol_rank, _ = _tols(args, doc)
    report = validate(doc.model)
    if not report.passed:
        _emit({"command": "matrix", "report": report.as_dict()}, out)
        return EXIT_VERDICT
    sys_ = assemble(doc.model)
    red = kron_reduce(sys_, tol_rank)
    os.makedirs(args.out, exist_ok=True)
    full = " ".join(f"{nid}@{s.offset}:{s.offset + s.width}" for nid, s in sys_.layout.items())
    cols, off = [], 0
    for br in doc.model.branches:
        w = 2 * doc.model.node(br.from_node).phase_count
        cols.append(f"{br.from_node}->{br.to_node}@{off}:{off + w}")
        off += w
    dumps = {
        "B.csv": (sys_.B, f"rows: {full}\ncolumns: {' '.join(cols)}"),
        "W.csv": (sys_.W, f"columns: {' '.join(cols)}"),
        "J.csv": (sys_.J, f"rows/columns: {full}"),
        "J_red.csv": (red.J_red, f"rows/columns: {_header(red, 'ext')}"),
    }
    for name, (mat, header) in dumps.items():
        np.savetxt(os.path.join(args.out, name), mat, delimiter=",", fmt="%.17g", header=header)
    body = {
        "command": "matrix",
        "files": sorted(dumps),
        "shapes": {k: list(v[0].shape) for k, v in dumps.items()},
        "rank_ratio_interior": red.rank_ratio,
    }
    _emit(body, out)
    return EXIT_OK


def cmd_certify(args, out):
    doc = _load_doc(args)
    tol_rank, tol_zero = _tols(args, doc)
    specs = _specs(args, doc)
    report = validate(doc.model)
    if not report.passed:
        _emit({"command": "certify", "report": report.as_dict()}, out)
        return EXIT_VERDICT
    cert = certify(
        doc.model,
        specs,
        tol_rank=tol_rank,
        tol_zero_eig=tol_zero,
        allow_heterogeneous=args.allow_heterogeneous,
    )
    body = {"command": "certify", "certificate": cert.as_dict()}
    _emit(body, out)
    return EXIT_OK if cert.verdict == "stable" else EXIT_VERDICT


def _write_csv(path, names, data):
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=",".join(names), comments="")


def cmd_simulate(args, out):
    doc = _load_doc(args)
    tol_rank, tol_zero = _tols(args, doc)
    specs = _specs(args, doc)
    t_end = args.t_end or doc.analysis.t_end or DEFAULT_T_END
    dt = args.dt or doc.analysis.dt or DEFAULT_DT
    cert = certify(doc.model, specs, tol_rank=tol_rank, tol_zero_eig=tol_zero,
                   allow_heterogeneous=args.allow_heterogeneous)
    traj = simulate(cert.closed_loop, None, doc.loads, t_end, dt, method=args.method)
    os.makedirs(args.out, exist_ok=True)
    names, data = traj.columns()
    _write_csv(os.path.join(args.out, "trajectory.csv"), names, data)
    buses = [n.id for n in doc.model.nodes if n.phase_count == 3 and n.exterior]
    if doc.analysis.monitor_bus and doc.analysis.monitor_bus not in buses:
        buses.append(doc.analysis.monitor_bus)
    ub_names, ub_cols, final = ["time"], [traj.t[:, None]], {}
    for bus in buses:
        rep = unbalance_factors(traj, bus)
        for tag, series in (("VUF", rep.V_UF), ("PUF", rep.P_UF), ("QUF", rep.Q_UF), ("VUFN", rep.V_UF_N)):
            ub_names.append(f"{tag}_{bus}")
            ub_cols.append(series[:, None])
        final[bus] = {"V_UF": rep.V_UF[-1], "P_UF": rep.P_UF[-1], "Q_UF": rep.Q_UF[-1], "V_UF_N": rep.V_UF_N[-1]}
    _write_csv(os.path.join(args.out, "unbalance.csv"), ub_names, np.hstack(ub_cols))
    body = {
        "command": "simulate",
        "verdict": cert.verdict,
        "method": args.method,
        "samples": int(len(traj.t)),
        "t_end": float(traj.t[-1]),
        "final_omega": {n: data[-1, i] for i, n in enumerate(names) if n.startswith("omega_")},
        "final_unbalance": final,
        "files": ["trajectory.csv", "unbalance.csv"],
    }
    _emit(body, out)
    return EXIT_OK


def _sweep_rows(args, doc):
    tol_rank, _ = _tols(args, doc)
    kbals = _parse_list(args.kbal, "--kbal") if args.kbal else doc.analysis.kbal_sweep
    levels = _parse_levels(args.load) if args.load else doc.analysis.load_levels()
    sweep_bus = args.sweep_bus or doc.analysis.sweep_bus
    monitor_bus = args.monitor_bus or doc.analysis.monitor_bus or sweep_bus
    missing = [n for n, v in (("k_bal values", kbals), ("load levels", levels), ("sweep bus", sweep_bus)) if not v]
    if missing:
        raise InputError(f"sweep needs {', '.join(missing)} (flags or [analysis] section)")
    report = validate(doc.model)
    if not report.passed:
        raise ValidationFailed(report)
    red = kron_reduce(assemble(doc.model), tol_rank)
    rows = sweep(red, doc.converters, sweep_bus, monitor_bus, kbals, levels,
                 allow_heterogeneous=args.allow_heterogeneous)
    return rows, sweep_bus, monitor_bus


def cmd_sweep(args, out):
    doc = _load_doc(args)
    rows, sweep_bus, monitor_bus = _sweep_rows(args, doc)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        keys = ["k_bal", "load", "omega_common", "V_UF", "P_UF", "Q_UF", "V_UF_N"]
        _write_csv(os.path.join(args.out, "sweep.csv"), keys, np.array([[r[k] for k in keys] for r in rows]))
    _emit({"command": "sweep", "sweep_bus": sweep_bus, "monitor_bus": monitor_bus, "rows": rows}, out)
    return EXIT_OK


def cmd_unbalance(args, out):
    doc = _load_doc(args)
    rows, sweep_bus, monitor_bus = _sweep_rows(args, doc)
    corr = correlation_study(rows)
    body = {
        "command": "unbalance",
        "monitor_bus": monitor_bus,
        "pairs": [{"k_bal": r["k_bal"], "load": r["load"], "V_UF": r["V_UF"], "V_UF_N": r["V_UF_N"]} for r in rows],
        "correlation": corr.coefficient,
        "zero_consistent": corr.zero_consistent,
    }
    _emit(body, out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gfmnet",
        description="Stability certificates, simulation and unbalance sweeps for grid-forming networks.",
        epilog="Exit codes: 0 success, 1 verdict failure, 2 input error.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="network document (.net)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="lenient", action="store_false", help="unknown keys are errors (default)")
    mode.add_argument("--lenient", dest="lenient", action="store_true", help="unknown keys are warnings")
    common.set_defaults(lenient=False)
    common.add_argument("--tol-rank", type=float, default=None, help="relative rank cut for the interior block")
    common.add_argument("--tol-zero-eig", type=float, default=None, help="relative zero-eigenvalue cut")

    analysis = argparse.ArgumentParser(add_help=False)
    analysis.add_argument("--allow-heterogeneous", action="store_true", help="accept different m_d per converter")

    sub.add_parser("validate", parents=[common], help="check well-posedness")
    p = sub.add_parser("matrix", parents=[common], help="dump B, W, J and J_red as CSV")
    p.add_argument("--out", required=True, help="output directory")
    p = sub.add_parser("certify", parents=[common, analysis], help="stability certificate")
    p.add_argument("--kbal", help="override k_bal of every generalized-droop converter")
    p = sub.add_parser("simulate", parents=[common, analysis], help="time-domain simulation")
    p.add_argument("--kbal", help="override k_bal of every generalized-droop converter")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--method", choices=("expm", "rk4"), default="expm")
    p.add_argument("--out", required=True, help="output directory")
    for name, text in (("sweep", "steady-state unbalance sweep"), ("unbalance", "V_UF vs V_UF_N correlation")):
        p = sub.add_parser(name, parents=[common, analysis], help=text)
        p.add_argument("--kbal", help="comma-separated k_bal values")
        p.add_argument("--load", help="a-c load levels: start:stop:step or comma list")
        p.add_argument("--sweep-bus", default=None)
        p.add_argument("--monitor-bus", default=None)
        if name == "sweep":
            p.add_argument("--out", default=None, help="also write sweep.csv here")
    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "matrix": cmd_matrix,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "unbalance": cmd_unbalance,
}


def _error_block(exc, out):
    err = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, DocumentError):
        err.update(message=exc.message, line=exc.line, column=exc.column, kind=exc.kind)
    out.write(json.dumps({"error": err}, indent=2, sort_keys=True) + "\n")


def run_command(argv=None, out=None):
    """Run one command and return its exit code."""
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return _COMMANDS[args.command](args, out)
    except (ValidationFailed, NotStable, RankDeficientInterior) as exc:
        _error_block(exc, out)
        return EXIT_VERDICT
    except (DocumentError, InputError, OSError, GfmError, ValueError) as exc:
        _error_block(exc, out)
        return EXIT_INPUT


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()


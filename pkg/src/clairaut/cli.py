"""Command-line front end.

Exit codes: 0 expectations met, 1 expectation mismatch, 2 input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import lab, report
from .errors import (
    DomainError,
    EvaluationError,
    GeometryError,
    IntegrationDivergedError,
    MetricSingularityError,
    NumericError,
    ScenarioError,
    ScenarioValidationError,
    SingularMetricError,
)
from .geodesic import GeodesicState, integrate
from .scenarios import get_scenario, load_scenario, scenario_names, validate_scenario

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    pass


def _flag(v) -> str:
    return "-" if v is None else ("yes" if v else "no")


def resolve_scenario(args):
    path = args.file
    name = args.scenario or args.name
    if path is None and name is not None and (name.endswith(".scenario") or Path(name).is_file()):
        path = name
    if path is not None:
        return load_scenario(path)
    if name is None:
        raise InputError("no scenario given; use --scenario NAME or --file PATH")
    return validate_scenario(get_scenario(name))


def _config(args) -> report.RunConfig:
    try:
        return report.RunConfig(args.points, args.geodesics, args.step, args.t_end, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _checks_text(doc) -> str:
    lines = [f"scenario {doc['scenario']} (m={doc['dims']['total']}, n={doc['dims']['base']}), seed {doc['config']['seed']}"]
    for c in doc["checks"]:
        verdict = "pass" if c["pass"] else "FAIL"
        exp = "" if c["expected"] is None else f" expected {'pass' if c['expected'] else 'fail'}"
        flag = "" if c["matches_expectation"] else "  <-- mismatch"
        lines.append(f"  {c['check']:<28} max {c['residual_max']:.3e}  tol {c['tolerance']:.0e}  {verdict}{exp}{flag}")
        terms = (c.get("detail") or {}).get("terms")
        if terms:
            keys = sorted(k for k in terms[0] if k not in ("lhs", "rhs"))
            for k in keys:
                vals = [t[k] for t in terms]
                lines.append(f"      {k:<26} mean {np.mean(vals): .6e}  max|.| {np.max(np.abs(vals)):.6e}")
    for note in doc["notes"]:
        lines.append(f"  note: {note}")
    lines.append("expectations met" if doc["expectations_met"] else "expectation mismatch")
    return "\n".join(lines) + "\n"


def _checks_csv(doc) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "scenario", "residual_max", "residual_mean", "tolerance", "pass", "expected"])
    for c in doc["checks"]:
        w.writerow([
            c["check"], c["scenario"], format(c["residual_max"], ".17g"), format(c["residual_mean"], ".17g"),
            format(c["tolerance"], ".17g"), c["pass"], "" if c["expected"] is None else c["expected"],
        ])
    return buf.getvalue()


def _render(doc, fmt) -> str:
    if fmt == "json":
        return _dump_json(doc)
    if fmt == "csv":
        return _checks_csv(doc)
    return _checks_text(doc)


def cmd_scenarios(args) -> int:
    rows = []
    for name in scenario_names():
        sc = get_scenario(name)
        fl = sc.flags
        rows.append({
            "name": name, "total_dim": sc.m, "base_dim": sc.n,
            "conformal": fl.expected_conformal, "clairaut": fl.expected_clairaut,
            "umbilical": fl.expected_umbilical, "harmonic": fl.expected_harmonic,
            "einstein_fibers": fl.einstein_lambda_f is not None,
        })
    if args.format == "json":
        text = _dump_json({"schema": report.SCHEMA_VERSION, "scenarios": rows})
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    else:
        head = f"{'name':<32} {'m':>2} {'n':>2}  conformal clairaut umbilical harmonic"
        body = [
            f"{r['name']:<32} {r['total_dim']:>2} {r['base_dim']:>2}  {_flag(r['conformal']):<9} {_flag(r['clairaut']):<8} "
            f"{_flag(r['umbilical']):<9} {_flag(r['harmonic'])}"
            for r in rows
        ]
        text = "\n".join([head] + body) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _run(args, command: str) -> int:
    sc = resolve_scenario(args)
    config = _config(args)
    smp = report.Sampler(sc, config)
    notes: list[str] = []
    if command == "check":
        checks = report.basic_checks(sc, smp)
    elif command == "curvature":
        checks, note = report.curvature_checks(sc, smp)
        notes += [note] if note else []
    else:
        checks, notes = report.full_checks(sc, smp)
    doc = report.document(command, sc, config, checks, notes)
    _emit(_render(doc, args.format), args.out)
    return EXIT_OK if doc["expectations_met"] else EXIT_MISMATCH


def cmd_check(args) -> int:
    return _run(args, "check")


def cmd_curvature(args) -> int:
    return _run(args, "curvature")


def cmd_report(args) -> int:
    return _run(args, "report")


def _vector(text: str, dim: int, label: str) -> np.ndarray:
    try:
        vals = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise InputError(f"--{label} must be comma-separated numbers") from None
    if vals.size != dim or not np.all(np.isfinite(vals)):
        raise InputError(f"--{label} needs {dim} finite components")
    return vals


def cmd_geodesic(args) -> int:
    sc = resolve_scenario(args)
    config = _config(args)
    if (args.point is None) != (args.velocity is None):
        raise InputError("give both --point and --velocity, or neither")
    if args.point is not None:
        p = _vector(args.point, sc.m, "point")
        v = _vector(args.velocity, sc.m, "velocity")
        if float(v @ sc.total.g(p) @ v) <= 1e-24:
            raise InputError("initial velocity must be non-zero")
        state = GeodesicState(0.0, p, v)
    else:
        state = lab.sample_geodesic_states(sc.map, sc.sample_box, np.random.default_rng(config.seed), 1)[0]
    trace = integrate(sc.total, state, config.t_end, config.step)
    f = report.potential(sc)
    inv = lab.clairaut_invariant_trace(sc.map, f, trace)
    out = Path(args.out) if args.out else Path(f"{sc.name}_trace.csv")
    inv_path = out.with_name(out.stem + "_invariant" + out.suffix)
    trace.write_csv(out)
    inv_path.write_text(inv.to_csv(), encoding="utf-8")
    summary = {
        "schema": report.SCHEMA_VERSION,
        "command": "geodesic",
        "scenario": sc.name,
        "initial_point": state.point.tolist(),
        "initial_velocity": state.velocity.tolist(),
        "samples": len(trace),
        "speed_drift": trace.speed_drift,
        "invariant_drift": inv.drift,
        "invariant_tolerance": lab.INVARIANT_TOL,
        "trace_csv": str(out),
        "invariant_csv": str(inv_path),
    }
    if args.format == "json":
        sys.stdout.write(_dump_json(summary))
    else:
        sys.stdout.write(
            f"{sc.name}: {len(trace)} samples, speed drift {trace.speed_drift:.3e}, "
            f"invariant drift {inv.drift:.3e}\nwrote {out} and {inv_path}\n"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clairaut", description="Checks for conformal submersions and the Clairaut property.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_scenario=True):
        if with_scenario:
            p.add_argument("name", nargs="?", help="registry name or scenario file")
            p.add_argument("--scenario", help="registry scenario name")
            p.add_argument("--file", help="scenario file path")
        p.add_argument("--points", type=int, default=20)
        p.add_argument("--geodesics", type=int, default=10)
        p.add_argument("--step", type=float, default=1e-3)
        p.add_argument("--t-end", type=float, default=1.0, dest="t_end")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out")
        p.add_argument("--format", choices=("json", "csv", "text"), default="text")

    p = sub.add_parser("scenarios", help="list registry scenarios")
    common(p, with_scenario=False)
    p.set_defaults(func=cmd_scenarios)
    for name, func, help_ in (
        ("check", cmd_check, "conformal, umbilical, Clairaut, invariant and tension checks"),
        ("curvature", cmd_curvature, "vertical curvature and Ricci identities"),
        ("report", cmd_report, "every check"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.set_defaults(func=func)
    p = sub.add_parser("geodesic", help="integrate one geodesic and write trace CSVs")
    common(p)
    p.add_argument("--point", help="comma-separated initial point")
    p.add_argument("--velocity", help="comma-separated initial velocity")
    p.set_defaults(func=cmd_geodesic)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ScenarioError, ScenarioValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IntegrationDivergedError, MetricSingularityError, SingularMetricError, NumericError, EvaluationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GeometryError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

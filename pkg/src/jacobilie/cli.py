"""Command-line interface.

Exit codes: 0 success, 1 mathematical failure, 2 usage or input error,
3 evaluation domain fault.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .catalog import (CatalogError, ExcludedParameterError, ENV_VAR, bind_example, default_draws,
                      instantiate, load_catalog, verify_all, verify_entry)
from .expr import (BadBoxError, DomainError, ParseError, add, is_zero, mul, parse,
                   render)
from .jacobi import check_lie_symmetry, hamiltonian_vf, jacobi_bracket, symmetry_field
from .liesys import TIME, LieSystemSpec, check_invariant_along, integrate
from .multivec import Chart, MultiVectorField

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(Exception):
    pass


# helpers -----------------------------------------------------------------------------

def split_top(text: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return parts


def parse_params(items: Sequence[str] | None) -> dict[str, float] | None:
    if not items:
        return None
    out = {}
    for item in items:
        for kv in item.split(","):
            if "=" not in kv:
                raise UsageError(f"parameter {kv!r} is not of the form name=value")
            k, v = kv.split("=", 1)
            try:
                out[k.strip()] = float(v)
            except ValueError:
                raise UsageError(f"parameter value {v!r} is not a number") from None
    return out


def _entry(args):
    cat = load_catalog(args.catalog)
    if args.entry is None:
        raise UsageError("--entry is required")
    if args.entry not in cat:
        raise UsageError(f"unknown entry {args.entry!r}; run 'list' to see ids")
    return cat, cat[args.entry]


def _structure(args):
    cat, entry = _entry(args)
    params = parse_params(args.param)
    if params is None:
        params = default_draws(entry)[0]
    return entry, params, instantiate(entry, params)


def _parse_on(J, text: str, what: str):
    try:
        return J.chart.parse(text)
    except ParseError as exc:
        raise UsageError(f"cannot parse {what}: {exc}") from None


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.format == "json":
        out = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    else:
        out = "\n".join(text_lines) + "\n"
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)


def _settings(args) -> dict:
    return {"seed": args.seed, "samples": args.samples, "tol": args.tol}


def _fmt_res(r) -> str:
    return "n/a" if r is None or r != r else f"{r:.3e}"


# commands --------------------------------------------------------------------------------

def cmd_list(args) -> int:
    cat = load_catalog(args.catalog)
    rows = [{"id": e.id, "label": e.label, "params": list(e.param_names), "table": e.table,
             "examples": sorted(e.examples), "discrepancy": e.discrepancy is not None} for e in cat]
    lines = [f"{r['id']}  {r['label']}  params: {', '.join(r['params']) or 'none'}" for r in rows]
    if args.format == "json":
        _emit(args, rows, [])  # a plain JSON array
    else:
        _emit(args, {}, lines)
    return EXIT_OK


def cmd_verify(args) -> int:
    cat = load_catalog(args.catalog)
    s = _settings(args)
    if args.all:
        if args.entry or args.param:
            raise UsageError("--all cannot be combined with --entry or --param")
        workers = args.workers if args.workers is not None else min(8, os.cpu_count() or 1)
        reports = verify_all(cat, args.seed, args.samples, args.tol, workers=workers)
    else:
        if args.entry is None:
            raise UsageError("give --entry ID or --all")
        if args.entry not in cat:
            raise UsageError(f"unknown entry {args.entry!r}; run 'list' to see ids")
        entry = cat[args.entry]
        params = parse_params(args.param)
        draws = None
        if params is not None:
            instantiate(entry, params)  # validates, raising usage errors early
            draws = [params]
        reports = [verify_entry(entry, args.seed, args.samples, args.tol, draws)]
    lines = []
    for r in reports:
        lines.append(f"{r.entry}  {r.status.upper()}")
        for d in r.draws:
            ptxt = ", ".join(f"{k}={v:g}" for k, v in d.params.items()) or "no parameters"
            for rec in d.recursive.records():
                line = f"  [{ptxt}] {rec['axiom']}: {rec['verdict']} (max residual {_fmt_res(rec['max_residual'])})"
                if rec["witness"]:
                    wit = ", ".join(f"{k}={v:.6g}" for k, v in rec["witness"].items())
                    line += f" witness {rec['component']} at ({wit})"
                lines.append(line)
        if r.error:
            lines.append(f"  error: {r.error}")
    ok = all(r.ok for r in reports)
    lines.append(f"seed {args.seed}, samples {args.samples}, tol {args.tol:g}: "
                 f"{sum(r.status == 'pass' for r in reports)} pass, "
                 f"{sum(r.status == 'discrepancy' for r in reports)} flagged discrepancy, "
                 f"{sum(r.status not in ('pass', 'discrepancy') for r in reports)} other")
    _emit(args, {"command": "verify", **s, "ok": ok, "reports": [r.to_dict() for r in reports]}, lines)
    if any(r.error and "Domain" in r.error for r in reports):
        return EXIT_DOMAIN
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bracket(args) -> int:
    entry, params, J = _structure(args)
    f = _parse_on(J, args.f, "--f")
    g = _parse_on(J, args.g, "--g")
    b = jacobi_bracket(J, f, g)
    payload = {"command": "bracket", "entry": entry.id, "params": params, **_settings(args),
               "f": render(f), "g": render(g), "bracket": render(b)}
    lines = [f"{{f,g}} = {b}"]
    code = EXIT_OK
    if args.expect is not None:
        target = _parse_on(J, args.expect, "--expect")
        test = is_zero(add(b, mul(-1, target)), J.box, args.samples, args.tol, args.seed)
        if test.verdict == "bad_box":
            raise DomainError(test.message or "evaluation fault")
        payload.update({"expect": render(target), "verdict": "pass" if test else "fail",
                        "max_residual": test.max_residual, "witness": test.witness})
        lines.append(f"expect {target}: {'pass' if test else 'fail'} (max residual {_fmt_res(test.max_residual)})")
        if test.witness:
            lines.append("  witness " + ", ".join(f"{k}={v:.6g}" for k, v in test.witness.items()))
        code = EXIT_OK if test else EXIT_FAIL
    lines.append(f"seed {args.seed}")
    _emit(args, payload, lines)
    return code


def cmd_hamvf(args) -> int:
    entry, params, J = _structure(args)
    f = _parse_on(J, args.f, "--f")
    X = hamiltonian_vf(J, f)
    _emit(args, {"command": "hamvf", "entry": entry.id, "params": params, "f": render(f),
                 "field": X.to_dict(), **_settings(args)},
          [f"X_f = {X}"] + [f"  {k}: {v}" for k, v in X.to_strings(full=False).items()])
    return EXIT_OK


def _inline_system(args):
    if not args.coords:
        raise UsageError("inline generators need --coords")
    try:
        chart = Chart(tuple(c.strip() for c in args.coords.split(",")), ())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gens = []
    for g in args.generator:
        comps = {}
        for part in split_top(g):
            if "=" not in part:
                raise UsageError(f"generator component {part!r} is not of the form coord=expr")
            k, v = part.split("=", 1)
            try:
                comps[k.strip()] = chart.parse(v)
            except (ParseError, KeyError) as exc:
                raise UsageError(f"bad generator {g!r}: {exc}") from None
        try:
            gens.append(MultiVectorField(chart, 1, comps))
        except (KeyError, IndexError) as exc:
            raise UsageError(f"bad generator {g!r}: {exc}") from None
    return chart, gens, None


def cmd_integrate(args) -> int:
    if not args.dt > 0:
        raise UsageError("--dt must be positive")
    if not args.t1 > args.t0:
        raise UsageError("--t1 must exceed --t0")
    if args.generator:
        chart, gens, J = _inline_system(args)
        label = "inline"
    else:
        cat, entry = _entry(args)
        params = parse_params(args.param) or default_draws(entry)[0]
        kind = args.example or ("symmetry" if "symmetry" in entry.examples else "system")
        if kind not in entry.examples:
            raise UsageError(f"{entry.id} has no {kind} example")
        ex = bind_example(entry, kind, params)
        J = ex.structure
        chart = J.chart
        gens = [hamiltonian_vf(J, f) for f in ex.hamiltonians]
        label = f"{entry.id} {kind}"
    try:
        coeffs = [parse(b, coords=(TIME,)) for b in split_top(args.b)]
    except ParseError as exc:
        raise UsageError(f"cannot parse --b: {exc}") from None
    if len(coeffs) != len(gens):
        raise UsageError(f"--b gives {len(coeffs)} coefficients for {len(gens)} generators")
    try:
        x0 = [float(v) for v in args.x0.split(",")]
    except ValueError:
        raise UsageError("--x0 must be comma-separated numbers") from None
    if len(x0) != chart.dimension:
        raise UsageError(f"--x0 needs {chart.dimension} values")
    sys_spec = LieSystemSpec(chart, tuple(gens), tuple(coeffs))
    traj = integrate(sys_spec, x0, args.t0, args.t1, args.dt)
    if args.trajectory:
        fmt = args.trajectory_format or ("json" if args.trajectory.endswith(".json") else "csv")
        Path(args.trajectory).write_text(traj.to_csv() if fmt == "csv" else traj.to_json(), encoding="utf-8")
    end = traj.point(len(traj.times) - 1)
    payload = {"command": "integrate", "system": label, "method": traj.method, "dt": traj.dt,
               "steps": len(traj.times) - 1, "t_end": float(traj.times[-1]), "x_end": end,
               "fault": traj.fault, **_settings(args)}
    lines = [f"{label}: {len(traj.times) - 1} RK4 steps, t = {traj.times[-1]:g}",
             "  x(t_end) = " + ", ".join(f"{k}={v:.12g}" for k, v in end.items())]
    code = EXIT_OK
    if traj.fault:
        lines.append(f"  domain fault: {traj.fault}")
        payload["fault"] = traj.fault
        code = EXIT_DOMAIN
    if args.invariant is not None:
        try:
            h = chart.parse(args.invariant)
        except ParseError as exc:
            raise UsageError(f"cannot parse --invariant: {exc}") from None
        chk = check_invariant_along(traj, h, args.drift_tol)
        payload.update({"invariant": render(h), "max_drift": chk.max_drift, "drift_tol": args.drift_tol,
                        "verdict": "pass" if chk else "fail"})
        lines.append(f"  invariant {h}: max drift {chk.max_drift:.3e} "
                     f"({'pass' if chk else 'fail'} at tol {args.drift_tol:g})")
        if code == EXIT_OK and not chk:
            code = EXIT_FAIL
    _emit(args, payload, lines)
    return code


def cmd_symmetry(args) -> int:
    cat, entry = _entry(args)
    params = parse_params(args.param) or default_draws(entry)[0]
    kind = "symmetry" if "symmetry" in entry.examples else ("system" if "system" in entry.examples else None)
    if kind is None:
        raise UsageError(f"{entry.id} has no example generators to test against")
    ex = bind_example(entry, kind, params)
    J = ex.structure
    h = _parse_on(J, args.h, "--h")
    Xh = symmetry_field(J, h)
    gens = list(ex.fields) if ex.fields else [hamiltonian_vf(J, f) for f in ex.hamiltonians]
    if args.computed_generators:
        gens = [hamiltonian_vf(J, f) for f in ex.hamiltonians]
    test = check_lie_symmetry(Xh, gens, J.box, args.samples, args.tol, args.seed)
    if test.verdict == "bad_box":
        raise DomainError(test.message or "evaluation fault")
    payload = {"command": "symmetry", "entry": entry.id, "params": params, "h": render(h),
               "field": Xh.to_dict(), "verdict": "pass" if test else "fail",
               "max_residual": test.max_residual, "witness": test.witness, "failing": test.label,
               **_settings(args)}
    lines = [f"X_h = {Xh}",
             f"commutes with {len(gens)} generator(s): {'pass' if test else 'fail'} "
             f"(max residual {_fmt_res(test.max_residual)})"]
    if not test:
        lines.append(f"  {test.label} nonzero at " + ", ".join(f"{k}={v:.6g}" for k, v in test.witness.items()))
    lines.append(f"seed {args.seed}")
    _emit(args, payload, lines)
    return EXIT_OK if test else EXIT_FAIL


def cmd_report(args) -> int:
    from .report import run_report

    cat = load_catalog(args.catalog)
    reports = verify_all(cat, args.seed, args.samples, args.tol)
    checks = run_report(cat, args.samples, args.tol, args.seed)
    ok = all(r.ok for r in reports) and all(c.ok for c in checks)
    lines = [f"{r.entry}  verify  {r.status}" for r in reports]
    for c in checks:
        ptxt = ", ".join(f"{k}={v:g}" for k, v in c.params.items())
        flag = " (recorded)" if c.flagged and c.status == "discrepancy" else ""
        lines.append(f"{c.entry} {c.example}{' [' + ptxt + ']' if ptxt else ''}  {c.check}: {c.status}{flag}")
    lines.append(f"seed {args.seed}: {'all checks pass or are recorded discrepancies' if ok else 'FAILURES present'}")
    _emit(args, {"command": "report", **_settings(args), "ok": ok,
                 "verify": [r.to_dict() for r in reports], "checks": [c.to_dict() for c in checks]}, lines)
    return EXIT_OK if ok else EXIT_FAIL


# parser ------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--catalog", default=None, help=f"catalog file (default: ${ENV_VAR} or the shipped data)")
    common.add_argument("--samples", type=int, default=200)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--output", default=None, help="write the report here instead of stdout")

    def entry_opts(p, required=False):
        p.add_argument("--entry", required=required)
        p.add_argument("--param", action="append", help="name=value, repeatable")

    parser = argparse.ArgumentParser(prog="jacobilie", description="Jacobi structure verifier")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", parents=[common], help="list catalog entries")

    p = sub.add_parser("verify", parents=[common], help="check the Jacobi axioms")
    entry_opts(p)
    p.add_argument("--all", action="store_true")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("bracket", parents=[common], help="Kirillov bracket of two functions")
    entry_opts(p, True)
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--expect")

    p = sub.add_parser("hamvf", parents=[common], help="Hamiltonian vector field of a function")
    entry_opts(p, True)
    p.add_argument("--f", required=True)

    p = sub.add_parser("integrate", parents=[common], help="integrate a Lie system with RK4")
    entry_opts(p)
    p.add_argument("--example", choices=("system", "symmetry"))
    p.add_argument("--coords", help="inline chart coordinates, e.g. x,y")
    p.add_argument("--generator", action="append", default=[], help="inline generator, e.g. 'x=-y,y=x'")
    p.add_argument("--b", required=True, help="time coefficients b_i(t), comma-separated")
    p.add_argument("--x0", required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--invariant")
    p.add_argument("--drift-tol", type=float, default=1e-6)
    p.add_argument("--trajectory", help="trajectory output path (.csv or .json)")
    p.add_argument("--trajectory-format", choices=("csv", "json"))

    p = sub.add_parser("symmetry", parents=[common], help="check a candidate symmetry field X_h")
    entry_opts(p, True)
    p.add_argument("--h", required=True)
    p.add_argument("--computed-generators", action="store_true",
                   help="test against X_f of the example Hamiltonians instead of the stored fields")

    sub.add_parser("report", parents=[common], help="full sweep: axioms plus every example identity")
    return parser


COMMANDS = {"list": cmd_list, "verify": cmd_verify, "bracket": cmd_bracket, "hamvf": cmd_hamvf,
            "integrate": cmd_integrate, "symmetry": cmd_symmetry, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, CatalogError, ExcludedParameterError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, BadBoxError) as exc:
        print(f"domain fault: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``derive``, ``verify``, ``integrate`` and ``catalog``.

Exit codes: 0 success, 1 usage error, 2 failed certificate, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .document import EquationDocument
from .gauge import miura_map
from .hierarchy import (
    CertificateError,
    check_homogeneity,
    flow_commutator,
    flow_indices,
    generalized_setup,
    generate_flow_generalized,
    generate_flow_kdv,
    generate_flow_mkdv,
    miura_intertwining_residual,
    zero_curvature_residual,
)
from .lie import HEISENBERG_IDS, get_heisenberg, make_sln
from .numeric import (
    DIFF_METHODS,
    GridFunction,
    NumericError,
    compile_flow,
    grid,
    integrate,
    kdv_soliton,
    kdv_soliton_parameters,
    miura_check,
    stable_dt_bound,
    write_trajectory,
)

EXIT_OK, EXIT_USAGE, EXIT_CERT, EXIT_NUMERIC = 0, 1, 2, 3
HIERARCHIES = ("kdv", "mkdv", "generalized")
CHECKS = ("zero-curvature", "commute", "miura", "homogeneity")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- argument helpers --------------------------------------------------------------

def parse_algebra(text: str):
    m = re.fullmatch(r"sl(\d+)", text.strip())
    if not m or int(m.group(1)) < 2:
        raise UsageError(f"unknown algebra {text!r}; expected sl<n> with n >= 2")
    return make_sln(int(m.group(1)))


def parse_int_list(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma separated list of integers, got {text!r}") from None
    if not out:
        raise UsageError("empty list of flow indices")
    return out


def parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    for item in text.split(","):
        m = re.fullmatch(r"\s*(-?\d+)\s*:\s*(-?\d+)\s*", item)
        if not m:
            raise UsageError(f"bad pair {item!r}; expected m:n")
        pairs.append((int(m.group(1)), int(m.group(2))))
    return pairs


def build_flow(lie, hierarchy: str, m: int, heisenberg: str = "principal", method: str = "gauge_projection"):
    """Derive one flow, turning bad indices and ids into :class:`UsageError`."""
    try:
        if hierarchy == "kdv":
            return generate_flow_kdv(lie, m, method)
        if hierarchy == "mkdv":
            return generate_flow_mkdv(lie, m)
        if hierarchy == "generalized":
            spec = get_heisenberg(heisenberg, lie)
            p = spec.basis(-1)[0]
            return generate_flow_generalized(spec, p, -m)
    except (ValueError, KeyError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        raise UsageError(str(msg)) from None
    raise UsageError(f"unknown hierarchy {hierarchy!r}")


# -- derive ------------------------------------------------------------------------

def cmd_derive(args) -> int:
    lie = parse_algebra(args.algebra)
    if args.hierarchy != "generalized" and args.heisenberg != "principal":
        raise UsageError("--heisenberg only applies to the generalized hierarchy")
    docs = [EquationDocument.from_flow(build_flow(lie, args.hierarchy, m, args.heisenberg, args.method))
            for m in parse_int_list(args.times)]
    if args.format == "json":
        payload = docs[0].to_dict() if len(docs) == 1 else [d.to_dict() for d in docs]
        text = json.dumps(payload, indent=2)
    else:
        text = "\n\n".join(d.render(args.format) for d in docs)
    _emit(text + "\n", args.output)
    return EXIT_OK


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# -- verify ------------------------------------------------------------------------

def _zero(polys) -> bool:
    return all(not p for p in polys.values())


def _residual_text(polys, ring) -> str:
    return "; ".join(f"{x}: {ring.render(p)}" for x, p in polys.items() if p)


def cmd_verify(args) -> int:
    lie = parse_algebra(args.algebra)
    checks = [c.strip() for c in args.check.split(",")]
    for c in checks:
        if c not in CHECKS:
            raise UsageError(f"unknown check {c!r}; choose from {', '.join(CHECKS)}")
    times = parse_int_list(args.times) if args.times else flow_indices(lie, 5)
    failures = 0

    def report(label, ok, detail=""):
        nonlocal failures
        failures += not ok
        status = "exact-zero" if ok else "FAIL"
        print(f"{label}: {status}" + (f"  residual {detail}" if detail else ""))

    def flow(m):
        return build_flow(lie, args.hierarchy, m, args.heisenberg)

    for check in checks:
        if check == "zero-curvature":
            for m in times:
                f = flow(m)
                res = zero_curvature_residual(f)
                report(f"zero-curvature {lie.id} {args.hierarchy} m={m}", not res,
                       res.to_text(f.ring) if res else "")
        elif check == "commute":
            if not args.pairs:
                raise UsageError("--check commute needs --pairs m:n")
            for a, b in parse_pairs(args.pairs):
                fa, fb = flow(a), flow(b)
                res = flow_commutator(fa, fb)
                report(f"commute {lie.id} {args.hierarchy} [D{a}, D{b}]", _zero(res),
                       "" if _zero(res) else _residual_text(res, fa.ring))
        elif check == "miura":
            for m in times:
                try:
                    res = miura_intertwining_residual(lie, m)
                except ValueError as exc:
                    raise UsageError(str(exc)) from None
                ring = build_flow(lie, "kdv", m).ring
                report(f"miura {lie.id} m={m} pushforward(mKdV) = KdV o Miura", _zero(res),
                       "" if _zero(res) else _residual_text(res, ring))
        elif check == "homogeneity":
            for m in times:
                f = flow(m)
                if args.hierarchy == "generalized":
                    spec = get_heisenberg(args.heisenberg, lie)
                    if not generalized_setup(spec, spec.basis(-1)[0]).homogeneous:
                        print(f"homogeneity {lie.id} {args.heisenberg} m={m}: not applicable "
                              "(coordinates are filtered, not graded)")
                        continue
                bad = check_homogeneity(f)
                detail = "; ".join(f"{x}: weights {sorted(w)} expected {f.rhs_weight(x)}"
                                   for x, w in bad.items())
                report(f"homogeneity {lie.id} {args.hierarchy} m={m}", not bad, detail)
    print(f"{'all certificates passed' if not failures else f'{failures} certificate(s) failed'}")
    return EXIT_OK if not failures else EXIT_CERT


# -- integrate ---------------------------------------------------------------------

def parse_equation(text: str) -> tuple[str, int]:
    m = re.fullmatch(r"(kdv|mkdv|generalized):(-?\d+)", text.strip())
    if not m:
        raise UsageError(f"bad --equation {text!r}; expected <kdv|mkdv|generalized>:<m>")
    return m.group(1), int(m.group(2))


def initial_state(spec: str, flow, n: int, length: float) -> tuple[dict, dict]:
    """Initial data plus a dict of extra facts (soliton parameters) for the report."""
    x = grid(n, length)
    names = flow.ring.variables
    kind, _, arg = spec.partition(":")
    if kind == "zero":
        return {v: GridFunction(np.zeros(n), length) for v in names}, {}
    if kind == "cos":
        amp = float(arg) if arg else 1.0
        vals = amp * np.cos(2 * math.pi * x / length)
        return {v: GridFunction(vals, length) for v in names}, {}
    if kind == "soliton":
        if flow.hierarchy_kind != "kdv" or flow.algebra_id != "sl2" or flow.m != 3:
            raise UsageError("soliton initial data is only available for sl2 kdv:3")
        amp = float(arg) if arg else -2.0
        if amp >= 0:
            raise UsageError("soliton amplitude must be negative for d/dt3 v = 3/2 v v' - 1/4 v'''")
        k = math.sqrt(-amp / 2)
        a, k, c = kdv_soliton_parameters(k)
        x0 = length / 2
        vals = kdv_soliton(x, 0.0, k, length, x0)
        return {names[0]: GridFunction(vals, length)}, {"soliton": {"A": a, "k": k, "c": c, "x0": x0}}
    if kind == "file":
        try:
            data = np.loadtxt(arg, delimiter=",", ndmin=2)
        except OSError as exc:
            raise UsageError(f"cannot read initial data: {exc}") from None
        if data.shape[0] != n and data.shape[1] == n:
            data = data.T
        if data.shape != (n, len(names)):
            raise UsageError(f"initial data must have {n} rows and {len(names)} column(s), got {data.shape}")
        return {v: GridFunction(data[:, i], length) for i, v in enumerate(names)}, {}
    raise UsageError(f"unknown --initial {spec!r}; use soliton[:A], cos[:a], zero or file:<path>")


def cmd_integrate(args) -> int:
    lie = parse_algebra(args.algebra)
    hierarchy, m = parse_equation(args.equation)
    flow = build_flow(lie, hierarchy, m, args.heisenberg)
    try:
        init, extra = initial_state(args.initial, flow, args.grid, args.length)
    except (ValueError, NumericError) as exc:
        raise UsageError(str(exc)) from None
    bound = stable_dt_bound(compile_flow(flow), args.grid, args.length)
    dt = args.dt if args.dt is not None else 0.9 * bound
    tmax = args.tmax
    if tmax is None:
        tmax = args.length / extra["soliton"]["c"] if "soliton" in extra else 1.0
    report = {"equation": args.equation, "algebra": lie.id, "grid": args.grid, "length": args.length,
              "dt_requested": dt, "dt_bound": bound, "tmax": tmax, "diff": args.diff, **extra}
    if args.miura:
        if hierarchy != "mkdv":
            raise UsageError("--miura needs an mkdv equation")
        kdv = build_flow(lie, "kdv", m)
        run = miura_check(flow, kdv, miura_map(lie), init, dt, tmax, args.diff)
        traj = run.trajectory
        report.update({"miura_residual": run.residual, "intertwining_error": run.intertwining_error})
    else:
        traj = integrate(flow, init, dt, tmax, diff_method=args.diff)
    if "soliton" in extra:
        s = extra["soliton"]
        exact = kdv_soliton(traj.x, traj.times[-1], s["k"], args.length, s["x0"])
        err = float(np.max(np.abs(traj.values[flow.ring.variables[0]][-1] - exact)))
        traj.diagnostics.extra["linf_error"] = err
        report["shape_error"] = err
    diag = traj.diagnostics
    report.update({"dt": diag.dt, "steps": diag.steps, "mass_drift": diag.mass_drift(),
                   "energy_drift": diag.energy_drift()})
    if args.output:
        paths = write_trajectory(traj, args.output, {"equation": args.equation, "algebra": lie.id,
                                                     "initial": args.initial, "tool_version": __version__})
        report["files"] = [str(p) for p in paths]
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


# -- catalog -----------------------------------------------------------------------

def cmd_catalog(args) -> int:
    print("algebras: sl<n> for n >= 2")
    for n in (2, 3, 4):
        lie = make_sln(n)
        print(f"  {lie.id}: exponents {list(lie.exponents)}, Coxeter number {lie.coxeter_number}, "
              f"flow indices {flow_indices(lie, 10)}")
    print("hierarchies: " + ", ".join(HIERARCHIES))
    print("heisenberg:")
    for hid in HEISENBERG_IDS:
        lie = make_sln(2)
        spec = get_heisenberg(hid, lie)
        scope = "sl2 only" if hid == "nonsmooth-sl2" else "sl<n>"
        print(f"  {hid} ({scope}): {spec.filtration_note}")
    print("checks: " + ", ".join(CHECKS))
    print("initial data: soliton[:A], cos[:a], zero, file:<path>")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dshierarchy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("derive", help="derive flow equations")
    d.add_argument("--algebra", default="sl2")
    d.add_argument("--hierarchy", choices=HIERARCHIES, default="kdv")
    d.add_argument("--heisenberg", default="principal")
    d.add_argument("--times", required=True, help="comma separated flow indices")
    d.add_argument("--format", choices=("text", "latex", "json"), default="text")
    d.add_argument("--method", choices=("gauge_projection", "miura_pushforward"), default="gauge_projection",
                   help="KdV derivation route")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_derive)

    v = sub.add_parser("verify", help="re-check exact certificates")
    v.add_argument("--check", required=True, help="comma separated: " + ", ".join(CHECKS))
    v.add_argument("--algebra", default="sl2")
    v.add_argument("--hierarchy", choices=HIERARCHIES, default="kdv")
    v.add_argument("--heisenberg", default="principal")
    v.add_argument("--times")
    v.add_argument("--pairs", help="comma separated m:n pairs for --check commute")
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("integrate", help="integrate a flow on a periodic grid")
    i.add_argument("--equation", required=True, help="<hierarchy>:<m>, e.g. kdv:3")
    i.add_argument("--algebra", default="sl2")
    i.add_argument("--heisenberg", default="principal")
    i.add_argument("--grid", type=int, default=256)
    i.add_argument("--length", type=float, default=100.0)
    i.add_argument("--dt", type=float)
    i.add_argument("--tmax", type=float)
    i.add_argument("--initial", default="soliton")
    i.add_argument("--diff", choices=DIFF_METHODS, default="spectral")
    i.add_argument("--miura", action="store_true", help="for mkdv: check the Miura image against KdV")
    i.add_argument("--output", help="CSV path; a JSON sidecar is written next to it")
    i.set_defaults(func=cmd_integrate)

    c = sub.add_parser("catalog", help="list algebras, Heisenberg ids and checks")
    c.set_defaults(func=cmd_catalog)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help/--version exit with 0, parse errors with EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dshierarchy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificateError as exc:
        print(f"dshierarchy: certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except NumericError as exc:
        print(f"dshierarchy: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # DS_TRUNC_BUFFER and similar environment problems
        print(f"dshierarchy: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

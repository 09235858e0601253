"""Command-line front end: ``finsler <command> --metric FILE ...``.

Exit codes: 0 success, 1 an invariant check failed, 2 usage or parse error.
The machine-readable report goes to ``--out`` (default stdout), a short
human summary to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from finsler import fields as fl
from finsler import spaces as sp
from finsler import verify as vr
from finsler import zoo
from finsler.errors import (
    DimensionError,
    DomainError,
    FinslerError,
    MissingFieldError,
    NotPositiveDefiniteError,
    ParseError,
    SpecError,
)
from finsler.sampling import sample_bundles
from finsler.specfile import MetricSpec, VectorFieldSpec, load_field, load_metric
from finsler.tensors import compute_bundle
from finsler.validate import validate_at, validate_spec

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

TENSOR_KEYS = ("g", "g_inv", "l_lo", "h", "C_lo", "C_mixed", "C_mean", "G_spray", "N", "G_berwald",
               "Gamma", "C_hder", "P", "P_lo", "P_mean", "T", "T2")


class UsageError(Exception):
    """Bad flag value; the message names the flag."""


def parse_at(text: str, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """``"x=0.1,0.2;y=1,0"`` -> (x, y).  Parts are ';'-separated, values ','-separated."""
    parts: dict[str, list[float]] = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        key, sep, vals = chunk.partition("=")
        key = key.strip()
        if not sep or key not in ("x", "y"):
            raise UsageError(f"--at: expected 'x=...;y=...', got {chunk!r}")
        if key in parts:
            raise UsageError(f"--at: {key} given twice")
        try:
            parts[key] = [float(v) for v in vals.replace(" ", "").split(",") if v]
        except ValueError:
            raise UsageError(f"--at: {key} must be a comma-separated list of numbers") from None
    for key in ("x", "y"):
        if key not in parts:
            raise UsageError(f"--at: missing {key}=...")
        if len(parts[key]) != dim:
            raise UsageError(f"--at: {key} has {len(parts[key])} values, metric dimension is {dim}")
    y = np.array(parts["y"])
    if not np.any(y):
        raise UsageError("--at: y must be nonzero")
    return np.array(parts["x"]), y


def parse_tol(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--tol: expected key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--tol: {key} must be a number") from None
    return out


def _load_metric(arg: str, tol: dict[str, float]) -> MetricSpec:
    if arg.startswith("zoo:"):
        try:
            spec = zoo.load(arg[4:])
        except KeyError as exc:
            raise UsageError(f"--metric: {exc.args[0]}") from None
    else:
        if not Path(arg).is_file():
            raise UsageError(f"--metric: no such file: {arg}")
        spec = load_metric(arg)
    if tol:
        spec = MetricSpec(spec.name, spec.dim, spec.expr, dict(spec.params), spec.sample_region,
                          {**spec.tolerances, **tol}, spec.source)
    return spec


def _load_field(args, dim: int) -> VectorFieldSpec | None:
    if args.field and args.sigma:
        raise UsageError("--field and --sigma are mutually exclusive")
    if args.field:
        if not Path(args.field).is_file():
            raise UsageError(f"--field: no such file: {args.field}")
        vf = load_field(args.field, dim)
        if vf.dim != dim:
            raise UsageError(f"--field: {args.field} has dimension {vf.dim}, metric has {dim}")
        return vf
    if args.sigma:
        try:
            return VectorFieldSpec.gradient_of(args.sigma, dim, "sigma")
        except ParseError as exc:
            raise ParseError(exc.message, exc.line, exc.column, exc.expected, exc.source, "--sigma") from None
    return None


def _emit(report: dict, out: str | None) -> None:
    text = vr.dumps(report)
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"--out: cannot write {out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# Commands

def _bundles(spec, args):
    if args.at:
        x, y = parse_at(args.at, spec.dim)
        return [compute_bundle(spec, x, y)], {"x": x.tolist(), "y": y.tolist()}
    return vr.bundles_for(spec, args.samples, args.seed), None


def cmd_validate(spec: MetricSpec, args) -> tuple[dict, bool]:
    if args.at:
        rep = validate_at(spec, [parse_at(args.at, spec.dim)])
    else:
        rep = validate_spec(spec, args.samples, args.seed)
    d = rep.as_dict()
    _say(f"{spec.name}: positivity {d['positivity']}, homogeneity {d['homogeneity']}, "
         f"positive-definite {d['positive_definite']} -> {'ok' if rep.ok else 'FAILED'}")
    return {"validation": d}, rep.ok


def cmd_tensors(spec: MetricSpec, args) -> tuple[dict, bool]:
    if args.at:
        x, y = parse_at(args.at, spec.dim)
        bundles = [compute_bundle(spec, x, y, args.pipeline)]
    else:
        bundles = sample_bundles(spec, args.samples, args.seed, pipeline=args.pipeline)
    rows = []
    for b in bundles:
        row = {"x": b.x, "y": b.y, "F": b.F, "C_norm2": b.C_norm2, "min_eigenvalue": b.min_eig}
        row.update({k: getattr(b, k) for k in TENSOR_KEYS})
        rows.append(row)
    _say(f"{spec.name}: tensors at {len(rows)} support element(s) via {args.pipeline}")
    return {"pipeline": args.pipeline, "support_elements": rows}, True


def cmd_classify(spec: MetricSpec, args) -> tuple[dict, bool]:
    bundles, _ = _bundles(spec, args)
    verdicts = sp.classify(bundles, dict(spec.tolerances))
    for v in verdicts:
        flag = "holds" if v.holds else "fails"
        if v.degenerate:
            flag += " (degenerate)"
        _say(f"  {v.condition:18s} {flag:20s} residual {v.residual_rel:.3e}")
    return {"conditions": [v.as_dict() for v in verdicts]}, True


def cmd_fields(spec: MetricSpec, args) -> tuple[dict, bool]:
    vf = args.vf
    results: dict = {}
    if args.find_field:
        x = parse_at(args.at, spec.dim)[0] if args.at else vr.region_center(spec)
        bundles = vr.bundles_for(spec, args.samples, args.seed, x)
        ns = fl.nullspace_from_bundles(bundles)
        results["sc_nullspace"] = ns.as_dict()
        results["cc_nullspace"] = fl.nullspace_from_bundles(bundles, attr="C_mixed").as_dict()
        _say(f"{spec.name}: SC nullspace dimension {ns.dim} at x = {np.round(x, 6).tolist()}")
        if vf is None:
            return results, True
    elif vf is None:
        raise MissingFieldError("fields needs --field, --sigma or --find-field")
    else:
        bundles, _ = _bundles(spec, args)
    tol = spec.tol("sc", sp.DEFAULT_TOL)
    checks = [fl.check_sc(vf, bundles, tol), fl.check_concurrent(vf, bundles, tol),
              fl.check_concurrent(vf, bundles, tol, condition="C")]
    if vf.is_gradient:
        checks.append(fl.check_cc(vf, bundles, spec.tol("cc", sp.DEFAULT_TOL)))
    for c in checks:
        _say(f"  {c.condition:11s} {'holds' if c.holds else 'fails':6s} residual {c.residual_rel:.3e}"
             + (" (zero field)" if c.zero_field else ""))
    results["checks"] = [c.as_dict() for c in checks]
    results["independence"] = fl.lemma1_independence(vf, bundles, tol).as_dict()
    return results, True


def cmd_verify(spec: MetricSpec, args) -> tuple[dict, bool]:
    vf = args.vf
    ids = vr.THEOREMS if args.theorem in (None, "all") else (args.theorem,)
    x = parse_at(args.at, spec.dim)[0] if args.at else None
    reports = []
    for tid in ids:
        if vf is None and not args.find_field:
            if args.theorem in (None, "all"):
                continue
            flag = "--sigma" if tid in ("T6", "C1") else "--field"
            raise MissingFieldError(f"{tid} needs {flag} (or --find-field)")
        rep = vr.run_theorem(tid, spec, vf, args.samples, args.seed, args.find_field, x)
        reports.append(rep)
        _say(f"  {tid}: {rep.verdict:24s} {rep.reason}")
    ok = not any(r.verdict == "violated" for r in reports)
    results: dict = {"theorems": [r.as_dict() for r in reports]}
    if args.theorem in (None, "all"):
        idents = vr.identity_suite(spec, args.samples, args.seed)
        bad = [i.name for i in idents if not i.passed]
        _say(f"  identities: {len(idents) - len(bad)}/{len(idents)} pass" + (f"; failing: {bad}" if bad else ""))
        results["identities"] = [i.as_dict() for i in idents]
        ok = ok and not bad
    return results, ok


COMMANDS = {
    "tensors": cmd_tensors,
    "classify": cmd_classify,
    "fields": cmd_fields,
    "verify": cmd_verify,
    "validate": cmd_validate,
}

_HELP = {
    "tensors": "dump every tensor at sampled or explicit support elements",
    "classify": "test the metric against each special-space condition",
    "fields": "check SC / C / CC / concurrent conditions for a vector field, or search for SC fields",
    "verify": "run the theorem harness (and the identity suite when no --theorem is given)",
    "validate": "check positivity, homogeneity and positive-definiteness of F",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finsler", description="Finsler geometry workbench.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_text in _HELP.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--metric", required=True, help="metric spec file, or zoo:NAME for a bundled metric")
        p.add_argument("--at", help='explicit support element, e.g. "x=0,0,0;y=1,0,0"')
        p.add_argument("--samples", type=int, default=100, help="number of support elements (default 100)")
        p.add_argument("--seed", type=int, default=42, help="sampling seed (default 42)")
        p.add_argument("--tol", action="append", metavar="KEY=VALUE", help="tolerance override, repeatable")
        p.add_argument("--out", help="write the report here instead of stdout")
        if name in ("fields", "verify"):
            p.add_argument("--field", help="vector-field spec file")
            p.add_argument("--sigma", help="scalar sigma(x); its gradient is the field")
            p.add_argument("--find-field", action="store_true", help="search for a semi-concurrent field at x")
        if name == "verify":
            p.add_argument("--theorem", choices=vr.THEOREMS + ("all",), help="theorem id (default: all)")
        if name == "tensors":
            p.add_argument("--pipeline", choices=("jet", "fd"), default="jet", help="derivative source")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.samples < 1:
            raise UsageError("--samples must be >= 1")
        spec = _load_metric(args.metric, parse_tol(args.tol))
        args.vf = _load_field(args, spec.dim) if args.command in ("fields", "verify") else None
        results, ok = COMMANDS[args.command](spec, args)
        report = vr.build_report(args.command, spec, results, args.seed, args.samples, args.vf, ok)
        if args.at:
            x, y = parse_at(args.at, spec.dim)
            report["sampling"]["at"] = {"x": x.tolist(), "y": y.tolist()}
        _emit(report, args.out)
    except (UsageError, ParseError, SpecError, MissingFieldError, DimensionError) as exc:
        _say(f"finsler {args.command}: error: {exc}")
        return EXIT_USAGE
    except (DomainError, NotPositiveDefiniteError) as exc:
        _say(f"finsler {args.command}: error at the requested support element: {exc}")
        return EXIT_FAIL
    except FinslerError as exc:
        _say(f"finsler {args.command}: error: {exc}")
        return EXIT_FAIL
    if not ok:
        _say(f"finsler {args.command}: invariant check failed")
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

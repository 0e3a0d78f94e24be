"""Command-line entry point, crystal documents and JSON run reports.

Every subcommand prints one JSON report on standard output.  Exit status is 0
when all checks pass, 1 when a check fails and 2 for usage errors (including
malformed crystal documents).  Reports are deterministic for fixed inputs and
seed; wall-clock timings live under the ``timings`` key, which
``--no-timings`` drops.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction
from typing import Any, Sequence

import jsonschema

from . import __version__
from .acris_ring import TateUnit, frobenius_intersection, get_pd_ring, log_truncation, pd_log_unit
from .cech_descent import CechWindow, h_modp
from .fcrystal import (
    FCrystal,
    brauer_profile,
    fppf_groups,
    newton_polygon,
    ordinary_av,
    standard_slope_module,
    supersingular_exe,
)
from .padic_core import PadicError, get_ring, is_prime, make_field, teichmuller
from .syntomic_check import logbar, map_M, verify_syntomic_exactness

__all__ = [
    "CRYSTAL_SCHEMA",
    "CrystalDocError",
    "crystal_to_doc",
    "crystal_from_doc",
    "build_parser",
    "run_command",
    "main",
]

PRECISION_ENV = "PADIC_CRIS_PRECISION"

# Entries are coordinate vectors over Z/p^(N+1): the crystal keeps one guard
# digit so that F/p is exact at precision N.
CRYSTAL_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "CrystalDoc",
    "type": "object",
    "required": ["p", "f", "N", "rank", "matrix"],
    "additionalProperties": False,
    "properties": {
        "p": {"type": "integer", "minimum": 2},
        "f": {"type": "integer", "minimum": 1},
        "N": {"type": "integer", "minimum": 1},
        "rank": {"type": "integer", "minimum": 0},
        "label": {"type": "string"},
        "matrix": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "string", "pattern": r"^-?[0-9]+(,-?[0-9]+)*$"},
            },
        },
    },
}


class CrystalDocError(ValueError):
    """A crystal document failed schema or consistency validation."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def crystal_to_doc(X: FCrystal) -> dict:
    rows = X.to_rows()
    return {
        "p": X.p,
        "f": X.f,
        "N": X.N,
        "rank": X.rank,
        "label": X.label,
        "matrix": [[",".join(str(c) for c in entry) for entry in row] for row in rows],
    }


def crystal_from_doc(doc: Any) -> FCrystal:
    validator = jsonschema.Draft202012Validator(CRYSTAL_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise CrystalDocError(
            [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        )
    p, f, N, r = doc["p"], doc["f"], doc["N"], doc["rank"]
    diag = []
    if not is_prime(p):
        diag.append(f"p: {p} is not prime")
    mat = doc["matrix"]
    if len(mat) != r or any(len(row) != r for row in mat):
        diag.append(f"matrix: expected {r}x{r} entries")
    vecs = [[[int(c) for c in s.split(",")] for s in row] for row in mat]
    if any(len(v) != f for row in vecs for v in row):
        diag.append(f"matrix: every entry needs {f} coordinates")
    if diag:
        raise CrystalDocError(diag)
    G = get_ring(p, f, N + 1)
    rows = [[G.from_coords(v) for v in row] for row in vecs]
    return FCrystal.from_matrix(p, f, N, rows, doc.get("label", ""))


# ---------------------------------------------------------------------------
# helpers


def _default_N() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return 3
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        sys.stderr.write(f"{PRECISION_ENV} must be a positive integer, got {raw!r}\n")
        raise SystemExit(2)
    return n


class _UsageError(Exception):
    pass


def _frac_list(text: str) -> list[Fraction]:
    try:
        return [Fraction(x) for x in text.split(",")]
    except (ValueError, ZeroDivisionError) as exc:
        raise _UsageError(f"bad exponent list {text!r}") from exc


def _need_prime(p: int) -> None:
    if not is_prime(p):
        raise _UsageError(f"p = {p} is not prime")


def _crystal_source(args) -> tuple[FCrystal, dict]:
    if args.input is not None:
        text = sys.stdin.read() if args.input == "-" else open(args.input, encoding="utf-8").read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CrystalDocError([f"not JSON: {exc}"]) from exc
        return crystal_from_doc(doc), {"input": args.input}
    preset = args.preset
    p, f, N = args.p, args.f, args.N
    _need_prime(p)
    if preset is None:
        raise _UsageError("give --preset or --input")
    if preset == "ordinary-av":
        deg = 1 if args.degree is None else args.degree
        X = ordinary_av(args.g, deg, p, N, f)
        cfg = {"preset": preset, "g": args.g, "degree": deg}
    elif preset == "supersingular-exe":
        deg = 2 if args.degree is None else args.degree
        X = supersingular_exe(deg, p, N, f)
        cfg = {"preset": preset, "degree": deg}
    elif preset == "slope-module":
        if args.slope is None:
            raise _UsageError("slope-module needs --slope R S")
        r, s = args.slope
        X = standard_slope_module(r, s, (p, f, N))
        cfg = {"preset": preset, "r": r, "s": s}
    else:  # pragma: no cover - argparse restricts choices
        raise _UsageError(f"unknown preset {preset}")
    cfg.update({"p": p, "f": f, "N": N})
    if args.label:
        X = FCrystal(X.p, X.f, X.N, X.phi, args.label)
    return X, cfg


def _check(name: str, ok: bool, **values) -> dict:
    return {"name": name, "status": "pass" if ok else "fail", **values}


# ---------------------------------------------------------------------------
# subcommands; each returns (config, checks, results)


def cmd_field(args):
    _need_prime(args.p)
    fd = make_field(args.p, args.f)
    res = {"minpoly": list(fd.minpoly), "order": fd.order}
    if args.N is not None:
        R = get_ring(args.p, args.f, args.N)
        res["sigma_matrix"] = [list(map(int, row)) for row in R.sigma_matrix]
    return {"p": args.p, "f": args.f, "N": args.N}, [], res


def cmd_teich(args):
    _need_prime(args.p)
    fd = make_field(args.p, args.f)
    coords = [int(x) for x in args.a.split(",")]
    a = coords[0] if len(coords) == 1 and args.f == 1 else coords
    t = teichmuller(fd, args.N, a)
    R = t.ring
    value = int(t) if args.f == 1 else list(R.coords(t.value))
    fixed = R.pow(t.value, args.p**args.f) == t.value
    return (
        {"p": args.p, "f": args.f, "N": args.N, "a": args.a},
        [_check("fixed point of x -> x^(p^f)", fixed)],
        {"teich": value},
    )


def cmd_acris_exact(args):
    _need_prime(args.p)
    rep = verify_syntomic_exactness(args.p, args.f, args.vars, args.depth, samples=args.samples, seed=args.seed)
    checks = [
        _check("left injective", rep.left_injective),
        _check("middle exact", rep.middle_exact),
        _check("right surjective", rep.right_surjective),
    ]
    cfg = {"p": args.p, "f": args.f, "vars": args.vars, "depth": args.depth, "samples": args.samples, "seed": args.seed}
    return cfg, checks, rep.to_dict()


def cmd_acris_log(args):
    _need_prime(args.p)
    exps = _frac_list(args.exps)
    den = max(e.denominator for e in exps)
    depth_e = 0
    while args.p**depth_e < den:
        depth_e += 1
    if args.p**depth_e != den:
        raise _UsageError("exponent denominators must be powers of p")
    _, W = log_truncation(args.p, max(args.N, 2))
    ring = get_pd_ring(args.p, args.f, args.N, len(exps), 0, depth_e + W + 2)
    coeff = [int(x) for x in args.coeff.split(",")]
    c = coeff[0] if len(coeff) == 1 else coeff
    try:
        u = TateUnit.of(ring, [(c, exps, args.e)])
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    closed = pd_log_unit(u, method="closed")
    series = pd_log_unit(u, method="series")
    checks = [_check("closed form equals series", closed == series)]
    res = {"log": repr(closed)}
    lb = logbar(TateUnit.of(ring.at_prec(1), [(c, exps, args.e)]))
    res["logbar"] = repr(lb)
    checks.append(_check("logbar in kernel of F/p - 1", map_M(lb).is_zero()))
    cfg = {"p": args.p, "f": args.f, "N": args.N, "exps": [str(e) for e in exps], "coeff": args.coeff, "e": args.e}
    return cfg, checks, res


def cmd_acris_inf(args):
    _need_prime(args.p)
    rep = frobenius_intersection(args.p, args.N, args.depth, args.n_max)
    res = {
        "ambient_rank": rep.ambient,
        "intersection_log_order": rep.intersection.log_order(),
        "ainf_log_order": rep.ainf.log_order(),
        "bound": str(rep.bound),
    }
    cfg = {"p": args.p, "N": args.N, "depth": args.depth, "n_max": args.n_max}
    return cfg, [_check("intersection of F^j images equals Ainf", rep.equal)], res


def cmd_fcrystal_new(args):
    X, cfg = _crystal_source(args)
    doc = crystal_to_doc(X)
    back = crystal_from_doc(json.loads(json.dumps(doc)))
    return cfg, [_check("document round-trip", back == X)], {"crystal": doc}


def cmd_fcrystal_slopes(args):
    X, cfg = _crystal_source(args)
    nw = newton_polygon(X)
    return cfg, [], nw.to_dict()


def cmd_fcrystal_fppf(args):
    X, cfg = _crystal_source(args)
    checks = []
    if args.input is None and args.all_degrees:
        if args.preset == "ordinary-av":
            top, build = 2 * args.g, lambda i: ordinary_av(args.g, i, args.p, args.N, args.f)
        elif args.preset == "supersingular-exe":
            top, build = 4, lambda i: supersingular_exe(i, args.p, args.N, args.f)
        else:
            raise _UsageError("--all-degrees needs ordinary-av or supersingular-exe")
        groups = [fppf_groups(build(i), tower_levels=args.tower_levels, degree=i) for i in range(top + 1)]
        ranks = [g.free_rank for g in groups]
        if args.preset == "ordinary-av":
            want = [args.g * math.comb(args.g, i - 1) if i else 0 for i in range(top + 1)]
            checks.append(_check("free ranks g*binom(g,i-1)", ranks == want, expected=want, computed=ranks))
            checks.append(_check("no finite torsion", all(not g.finite_torsion for g in groups)))
        cfg["degrees"] = list(range(top + 1))
        return cfg, checks, {"ranks": ranks, "groups": [g.to_dict() for g in groups]}
    grp = fppf_groups(X, tower_levels=args.tower_levels, degree=cfg.get("degree"))
    checks.append(_check("tower stable", grp.stable))
    return cfg, checks, grp.to_dict()


def cmd_fcrystal_brauer(args):
    if args.preset not in ("ordinary-av", "supersingular-exe"):
        raise _UsageError("brauer needs --preset ordinary-av or supersingular-exe")
    args.degree = 2
    X, cfg = _crystal_source(args)
    h2 = fppf_groups(X, tower_levels=args.tower_levels, degree=2)
    prof = brauer_profile(h2, h2, args.ns_rank)
    cfg["ns_rank"] = args.ns_rank
    return cfg, [], {"profile": prof.to_dict(), "h2": h2.to_dict()}


def cmd_cech_h(args):
    _need_prime(args.p)
    w = CechWindow(args.p, args.D, args.m_den)
    degrees = [0, 1] if args.degree is None else [args.degree]
    res, checks = {}, []
    for d in degrees:
        rep = h_modp(d, w)
        res[f"H{d}"] = rep.to_dict()
        checks.append(_check(f"H{d} matches de Rham oracle", rep.matches))
    return w.to_dict(), checks, res


def cmd_selftest(args):
    from . import selftest as st

    if args.inject_fault:
        st.inject_fault(args.inject_fault)
    try:
        if args.criteria:
            numbers = [int(x) for x in args.criteria.split(",")]
            if any(n not in st.CRITERIA for n in numbers):
                raise _UsageError(f"criteria must be among {sorted(st.CRITERIA)}")
        else:
            numbers = list(st.QUICK)
        results = st.run_criteria(numbers, seed=args.seed)
        if args.level == "full":
            again = [n for n in numbers if n in st.RANDOMIZED]
            results += st.run_criteria(again, seed=args.seed + 1)
    finally:
        if args.inject_fault:
            st.clear_fault()
    seeds = [args.seed] * len(numbers) + [args.seed + 1] * (len(results) - len(numbers))
    checks = [
        _check(f"criterion {r.number}: {r.name}", r.passed, seed=sd, values=r.values, failures=r.failures)
        for r, sd in zip(results, seeds)
    ]
    failed = sorted({r.number for r in results if not r.passed})
    cfg = {"level": args.level, "seed": args.seed, "criteria": numbers, "inject_fault": args.inject_fault}
    timings = {f"criterion {r.number} (seed {sd})": round(r.seconds, 3) for r, sd in zip(results, seeds)}
    return cfg, checks, {"failed": failed}, timings


# ---------------------------------------------------------------------------
# parser and driver


def _add_crystal_args(sp, default_p: int = 2) -> None:
    sp.add_argument("--preset", choices=["ordinary-av", "supersingular-exe", "slope-module"])
    sp.add_argument("--input", help="crystal document path, or - for stdin")
    sp.add_argument("--p", type=int, default=default_p)
    sp.add_argument("--f", type=int, default=1)
    sp.add_argument("--N", type=int, default=_default_N())
    sp.add_argument("--g", type=int, default=1)
    sp.add_argument("--degree", type=int)
    sp.add_argument("--slope", type=int, nargs=2, metavar=("R", "S"))
    sp.add_argument("--label", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="padic-cris", description="Exact p-adic crystalline computations.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--no-timings", action="store_true", help="omit wall-clock timings from the report")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("field", help="canonical F_{p^f} and σ on GR(p^N, f)")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--f", type=int, default=1)
    sp.add_argument("--N", type=int)
    sp.set_defaults(func=cmd_field)

    sp = sub.add_parser("teich", help="Teichmüller lift of a residue")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--f", type=int, default=1)
    sp.add_argument("--N", type=int, default=_default_N())
    sp.add_argument("--a", required=True, help="integer, or comma-separated coordinates")
    sp.set_defaults(func=cmd_teich)

    sp = sub.add_parser("acris-exact", help="mod-p syntomic exactness on a window")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--f", type=int, default=1)
    sp.add_argument("--vars", type=int, default=1)
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_acris_exact)

    sp = sub.add_parser("acris-log", help="logarithm of a unit 1 + c·x^α")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--f", type=int, default=1)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--exps", required=True, help="comma-separated exponents, one per variable")
    sp.add_argument("--coeff", default="1")
    sp.add_argument("--e", type=int, default=1)
    sp.set_defaults(func=cmd_acris_log)

    sp = sub.add_parser("acris-inf", help="∩ F^j(Acris) against Ainf on a window")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--depth", type=int, default=3)
    sp.add_argument("--n-max", type=int, default=3)
    sp.set_defaults(func=cmd_acris_inf)

    sp = sub.add_parser("fcrystal-new", help="emit a crystal document")
    _add_crystal_args(sp)
    sp.set_defaults(func=cmd_fcrystal_new)

    sp = sub.add_parser("fcrystal-slopes", help="Newton polygon")
    _add_crystal_args(sp)
    sp.set_defaults(func=cmd_fcrystal_slopes)

    sp = sub.add_parser("fcrystal-fppf", help="fppf cohomology along a field tower")
    _add_crystal_args(sp)
    sp.add_argument("--tower-levels", type=int, default=3)
    sp.add_argument("--all-degrees", action="store_true", help="run every degree of the preset")
    sp.set_defaults(func=cmd_fcrystal_fppf)

    sp = sub.add_parser("fcrystal-brauer", help="Brauer group profile from the H² crystal")
    _add_crystal_args(sp)
    sp.add_argument("--tower-levels", type=int, default=3)
    sp.add_argument("--ns-rank", type=int, required=True)
    sp.set_defaults(func=cmd_fcrystal_brauer)

    sp = sub.add_parser("cech-h", help="Čech cohomology mod p of the affine line")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--D", type=int, required=True)
    sp.add_argument("--m-den", type=int, default=1)
    sp.add_argument("--degree", type=int, choices=[0, 1])
    sp.set_defaults(func=cmd_cech_h)

    sp = sub.add_parser("selftest", help="run the acceptance battery")
    sp.add_argument("--level", choices=["quick", "full"], default="quick")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--criteria", help="comma-separated criterion numbers")
    sp.add_argument("--inject-fault", choices=["gamma_val"])
    sp.set_defaults(func=cmd_selftest)
    return ap


def _render(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=str)


def run_command(argv: Sequence[str]) -> tuple[int, dict]:
    """Run one subcommand; returns (exit code, report)."""
    try:
        args = build_parser().parse_args(list(argv))
    except SystemExit as exc:
        return (2 if exc.code not in (0, None) else 0), {"command": list(argv), "error": "usage"}
    report: dict = {"command": list(argv), "tool": "padic-cris", "version": __version__}
    t = time.perf_counter()
    try:
        out = args.func(args)
    except CrystalDocError as exc:
        report.update(status="usage-error", error="malformed crystal document", diagnostics=exc.diagnostics)
        return 2, report
    except (_UsageError, PadicError, ValueError, OSError) as exc:
        report.update(status="usage-error", error=f"{type(exc).__name__}: {exc}")
        return 2, report
    except Exception as exc:  # internal failure counts as a failed check
        report.update(status="check-failed", error=f"{type(exc).__name__}: {exc}")
        return 1, report
    cfg, checks, results = out[:3]
    timings = out[3] if len(out) > 3 else {}
    timings["total"] = round(time.perf_counter() - t, 3)
    ok = all(c["status"] == "pass" for c in checks)
    report.update(config=cfg, checks=checks, results=results, status="ok" if ok else "check-failed")
    if not args.no_timings:
        report["timings"] = timings
    return (0 if ok else 1), report


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    code, report = run_command(argv)
    if report.get("error") != "usage" or code == 0:
        sys.stdout.write(_render(report) + "\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

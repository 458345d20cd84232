"""Command line front end.

Subcommands: gen, test, extract, convert, verify, bound, pipeline. Every
report is emitted as deterministic JSON (sorted keys, exact rationals as
"a/b" strings); wall time goes to stderr so repeated runs with the same
seed are byte identical. FAIL verdicts are data, not process errors: the
exit code is nonzero only for actual errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from enum import Enum
from fractions import Fraction

from . import __version__
from .bitstream import ADVERSARIAL_NAMES, BitPrefix, SourceSpec, read_bits, write_bits
from .convert import DEFAULT_FAMILY, diagonal_member
from .errors import HippocError, NoPassingLevel
from .exactnum import DyadicExpansion, RealParam, format_rational, parse_rational
from .extract import extract_prefix
from .randtests import (
    Outcome,
    cauchy_test,
    checkpoint_size,
    checkpoints,
    oracle_test,
    slln_bound,
    slln_test,
)
from .verify import (
    CauchyMC,
    DiagonalMC,
    OracleMC,
    SllnMC,
    brute_force_s4,
    chebyshev_check,
    exact_union_measure,
    kp_report,
    mc_estimate,
    moment_s4,
)

SCHEMA = "hippoc-report/1"


def jsonable(obj):
    """Deterministic JSON-ready form: exact rationals stay exact strings."""
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, DyadicExpansion):
        return str(obj)
    if isinstance(obj, Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    if hasattr(obj, "item"):  # numpy scalars
        return obj.item()
    return str(obj)


def emit_report(report: dict, fmt: str = "json") -> str:
    """Serialise a report deterministically."""
    payload = jsonable(report)
    if fmt == "json":
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if fmt == "text":
        lines = []

        def walk(prefix, value):
            if isinstance(value, dict):
                for key in sorted(value):
                    walk(f"{prefix}{key}.", value[key])
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    walk(f"{prefix}{i}.", item)
            else:
                lines.append(f"{prefix[:-1]}: {value}")

        walk("", payload)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _base_report(command: str, params: dict) -> dict:
    return {"schema": SCHEMA, "version": __version__, "command": command, "params": params}


# ---------------------------------------------------------------------------
# Sources and inputs


def _source_from_args(args) -> SourceSpec:
    name = getattr(args, "source", None) or "bernoulli"
    if name == "bernoulli":
        if args.p is None:
            raise HippocError("--p is required for a bernoulli source")
        return SourceSpec.bernoulli(RealParam.parse(args.p), args.seed)
    if name == "file":
        if not getattr(args, "infile", None):
            raise HippocError("--in is required for a file source")
        return SourceSpec.file(args.infile, args.informat)
    return SourceSpec.adversarial(
        name,
        p0=None if args.p0 is None else parse_rational(args.p0),
        p1=None if args.p1 is None else parse_rational(args.p1),
    )


def _load_bits(args) -> BitPrefix:
    return read_bits(args.infile, args.informat)


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_gen(args) -> dict:
    spec = _source_from_args(args)
    y = spec.realize(args.n)
    write_bits(y, args.out, args.format)
    report = _base_report("gen", {"n": args.n, "format": args.format, "out": str(args.out)})
    report["source"] = spec.describe()
    report["ones"] = y.ones_in_prefix()
    return report


def cmd_test(args) -> dict:
    y = _load_bits(args)
    if args.family == "oracle":
        if args.p is None:
            raise HippocError("--p is required for the oracle family")
        verdict = oracle_test(y, RealParam.parse(args.p), args.d, args.bmax)
    elif args.family == "cauchy":
        verdict = cauchy_test(y, args.d, args.bmax)
    elif args.family == "slln":
        if args.q1 is None or args.q2 is None or args.N is None or args.nmax is None:
            raise HippocError("slln needs --q1 --q2 --N --nmax")
        verdict = slln_test(y, parse_rational(args.q1), parse_rational(args.q2), args.N, args.nmax)
    else:
        raise HippocError(f"unknown family {args.family!r}")
    report = _base_report("test", {"family": args.family, "in": str(args.infile)})
    report["verdict"] = verdict_dict(verdict)
    return report


def verdict_dict(verdict) -> dict:
    out = {
        "family": verdict.family,
        "outcome": verdict.outcome.value,
        "resolution": verdict.resolution,
        "witness": None,
        "exact_values": {str(k): v for k, v in verdict.averages.items()},
    }
    if verdict.witness is not None:
        w = verdict.witness
        out["witness"] = {
            "deviation": w.deviation,
            "threshold": w.threshold,
            "level": w.level,
            "pair": list(w.pair) if w.pair else None,
            "index": w.index,
            "side": w.side,
            "values": list(w.values),
        }
    return out


def extraction_dict(report) -> dict:
    return {
        "functional": report.functional,
        "d": report.d,
        "b_budget": report.b_budget,
        "certified_bits": "".join(str(b) for b in report.bits()),
        "certificates": [
            {
                "position": c.position,
                "bit": c.bit,
                "level": c.level,
                "checkpoint": c.checkpoint,
                "expansion": c.expansion,
                "run_region": c.run_region,
            }
            for c in report.certificates
        ],
        "first_undecided": report.first_undecided,
        "highest_checkpoint": report.highest_checkpoint,
        "conflicts": list(report.conflicts),
    }


def cmd_extract(args) -> dict:
    y = _load_bits(args)
    ext = extract_prefix(y, args.d, args.bits, args.budget, args.functional)
    report = _base_report(
        "extract",
        {"functional": args.functional, "d": args.d, "bits": args.bits, "budget": args.budget},
    )
    report["extraction"] = extraction_dict(ext)
    return report


def cmd_convert(args) -> dict:
    y = _load_bits(args)
    verdict = diagonal_member(
        y, DEFAULT_FAMILY, d=args.n, n=args.n, k_max=args.kmax, resolution=args.bmax
    )
    report = _base_report(
        "convert", {"n": args.n, "k_max": args.kmax, "resolution": args.bmax}
    )
    report["diagonal"] = {
        "outcome": verdict.outcome,
        "witness_k": verdict.witness_k,
        "prefix_used": verdict.prefix_used,
        "declared_bound": Fraction(1, 1 << (args.n - 1)),
        "family": DEFAULT_FAMILY.name,
        "extraction": extraction_dict(verdict.extraction),
    }
    return report


def cmd_verify(args) -> dict:
    if args.claim == "moments":
        n, p = args.n, parse_rational(args.p)
        rep = moment_s4(n, p)
        out = _base_report("verify", {"claim": "moments", "n": n, "p": p})
        out["report"] = rep
        if n <= 14:
            brute = brute_force_s4(n, p)
            out["report"] = dataclasses.replace(rep, brute_force_value=brute)
            out["match"] = rep.formula_value == brute
        out["kp"] = kp_report(p)
        return out
    if args.claim == "chebyshev":
        rep = chebyshev_check(args.n, parse_rational(args.p), args.k)
        out = _base_report(
            "verify", {"claim": "chebyshev", "n": args.n, "p": args.p, "k": args.k}
        )
        out["report"] = rep
        out["satisfied"] = rep.bound_satisfied
        return out
    if args.claim == "exact-union":
        est = exact_union_measure(parse_rational(args.p), args.d, args.bmax)
        out = _base_report(
            "verify", {"claim": "exact-union", "p": args.p, "d": args.d, "b_max": args.bmax}
        )
        out["estimate"] = est
        return out
    if args.claim == "mc":
        p = RealParam.parse(args.p)
        if args.family == "oracle":
            spec = OracleMC(p=p.exact, d=args.d, b_max=args.bmax)
        elif args.family == "cauchy":
            spec = CauchyMC(d=args.d, b_max=args.bmax)
        elif args.family == "slln":
            spec = SllnMC(
                q1=parse_rational(args.q1),
                q2=parse_rational(args.q2),
                n_start=args.N,
                n_max=args.nmax,
            )
        elif args.family == "diagonal":
            spec = DiagonalMC(n=args.n, k_max=args.kmax, b_max=args.bmax)
        else:
            raise HippocError(f"unknown family {args.family!r}")
        prefix_len = args.prefix_len or spec.required_len()
        est = mc_estimate(spec, p, args.trials, prefix_len, args.seed)
        out = _base_report(
            "verify",
            {
                "claim": "mc",
                "family": args.family,
                "p": args.p,
                "trials": args.trials,
                "prefix_len": prefix_len,
                "seed": args.seed,
            },
        )
        out["estimate"] = est
        return out
    raise HippocError(f"unknown claim {args.claim!r}")


def cmd_bound(args) -> dict:
    if args.family != "slln":
        raise HippocError("only the slln bound is exposed here")
    value = slln_bound(
        parse_rational(args.p), parse_rational(args.q1), parse_rational(args.q2), args.N
    )
    out = _base_report(
        "bound", {"family": "slln", "p": args.p, "q1": args.q1, "q2": args.q2, "N": args.N}
    )
    out["bound"] = value
    out["clamped"] = min(value, Fraction(1))
    return out


# ---------------------------------------------------------------------------
# Pipeline: coherence scan, then extraction, then harness cross-checks


def true_bit(p: Fraction, position: int) -> int:
    """Digit at `position` of the canonical binary expansion of p in [0, 1)."""
    return (p * (1 << (position + 1))).__floor__() & 1


def run_pipeline(source: SourceSpec, d_start: int, b_budget: int, n_target: int) -> dict:
    """Scan for a passing coherence level, then extract digits there.

    The coherence test runs at d = d_start, d_start + 1, ... up to
    b_max - 1 (the last level with a checkable pair, where
    b_max = b_budget + 1 covers the deepest checkpoint extraction consults).
    When the source's true bias is known, the deviation and running-average
    tests are run too, and certified digits are checked against the true
    expansion.
    """
    if b_budget < 2:
        raise HippocError("pipeline needs b_budget >= 2")
    b_max = b_budget + 1
    need = checkpoint_size(b_max)
    y = source.realize(need)
    summary_levels = checkpoints(y, 1, b_max)

    attempts = []
    passing_d = None
    for d in range(d_start, b_max):
        verdict = cauchy_test(y, d, b_max)
        attempts.append({"d": d, "verdict": verdict_dict(verdict)})
        if verdict.outcome is Outcome.PASS:
            passing_d = d
            break
    if passing_d is None:
        raise NoPassingLevel(
            f"coherence test failed at every level in [{d_start}, {b_max - 1}]"
        )

    extraction = extract_prefix(y, passing_d, n_target, b_budget, functional="theta")

    report = {
        "bits_used": need,
        "cauchy_attempts": attempts,
        "passing_d": passing_d,
        "extraction": extraction_dict(extraction),
        "checkpoint_counts": {str(b): summary_levels.count(b) for b in summary_levels.levels()},
    }
    if not extraction.certificates:
        report["note"] = "undecided extraction: no digit certified within budget"

    true_p = source.p.exact if (source.p is not None and source.p.is_exact) else None
    if true_p is not None:
        oracle = oracle_test(y, RealParam.from_exact(true_p), passing_d, b_max)
        cross: dict = {"oracle": verdict_dict(oracle)}
        if 0 < true_p < 1:
            q1 = true_p * Fraction(7, 8)
            q2 = true_p + (1 - true_p) / 8
            n_start = min(1024, need)
            slln = slln_test(y, q1, q2, n_start, need)
            cross["slln"] = verdict_dict(slln)
        matches = [
            {"position": c.position, "bit": c.bit, "true_bit": true_bit(true_p, c.position)}
            for c in extraction.certificates
        ]
        cross["certified_vs_true"] = matches
        cross["all_correct"] = all(m["bit"] == m["true_bit"] for m in matches)
        report["cross_checks"] = cross
    return report


def cmd_pipeline(args) -> dict:
    spec = _source_from_args(args)
    body = run_pipeline(spec, args.d, args.budget, args.bits)
    report = _base_report(
        "pipeline",
        {"d_start": args.d, "b_budget": args.budget, "n_target": args.bits},
    )
    report["source"] = spec.describe()
    report.update(body)
    return report


# ---------------------------------------------------------------------------
# Parser


def _add_input(sub):
    sub.add_argument("--in", dest="infile", required=True, help="input bit file")
    sub.add_argument(
        "--informat", choices=("text01", "packed"), default="text01", help="input format"
    )


def _add_format(sub):
    sub.add_argument("--format", choices=("json", "text"), default="json")
    sub.add_argument("--json", action="store_true", help="force JSON output (default)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hippoc")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("gen", help="generate a bit stream")
    g.add_argument("--p", help="bias: rational a/b or binary prefix 0.bits")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--source", choices=("bernoulli",) + ADVERSARIAL_NAMES, default="bernoulli")
    g.add_argument("--p0", help="drifting-bias start")
    g.add_argument("--p1", help="drifting-bias end")
    g.add_argument("--out", required=True)
    g.set_defaults(handler=cmd_gen)
    g.add_argument("--format", choices=("text01", "packed"), default="text01")
    g.add_argument("--json", action="store_true")

    t = subs.add_parser("test", help="run one test family on a bit file")
    t.add_argument("--family", choices=("oracle", "cauchy", "slln"), required=True)
    t.add_argument("--d", type=int, default=1)
    t.add_argument("--bmax", type=int, default=4)
    t.add_argument("--p")
    t.add_argument("--q1")
    t.add_argument("--q2")
    t.add_argument("--N", type=int)
    t.add_argument("--nmax", type=int)
    _add_input(t)
    _add_format(t)
    t.set_defaults(handler=cmd_test)

    e = subs.add_parser("extract", help="certify bias digits from a bit file")
    e.add_argument("--functional", choices=("psi", "theta"), default="theta")
    e.add_argument("--d", type=int, default=1)
    e.add_argument("--bits", type=int, required=True, help="digits to attempt")
    e.add_argument("--budget", type=int, required=True, help="highest certifying level")
    _add_input(e)
    _add_format(e)
    e.set_defaults(handler=cmd_extract)

    c = subs.add_parser("convert", help="diagonal membership with extracted digits")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--kmax", type=int, required=True)
    c.add_argument("--bmax", type=int, required=True, help="checkpoint resolution")
    _add_input(c)
    _add_format(c)
    c.set_defaults(handler=cmd_convert)

    v = subs.add_parser("verify", help="check a quantitative claim")
    v.add_argument("--claim", choices=("moments", "chebyshev", "exact-union", "mc"), required=True)
    v.add_argument("--n", type=int)
    v.add_argument("--p")
    v.add_argument("--k", type=int)
    v.add_argument("--d", type=int, default=1)
    v.add_argument("--bmax", type=int, default=4)
    v.add_argument("--family", choices=("oracle", "cauchy", "slln", "diagonal"))
    v.add_argument("--q1")
    v.add_argument("--q2")
    v.add_argument("--N", type=int)
    v.add_argument("--nmax", type=int)
    v.add_argument("--kmax", type=int, default=8)
    v.add_argument("--trials", type=int, default=10000)
    v.add_argument("--prefix-len", type=int)
    v.add_argument("--seed", type=int, default=0)
    _add_format(v)
    v.set_defaults(handler=cmd_verify)

    b = subs.add_parser("bound", help="exact closed-form bound")
    b.add_argument("--family", default="slln")
    b.add_argument("--p", required=True)
    b.add_argument("--q1", required=True)
    b.add_argument("--q2", required=True)
    b.add_argument("--N", type=int, required=True)
    _add_format(b)
    b.set_defaults(handler=cmd_bound)

    pl = subs.add_parser("pipeline", help="coherence scan, extraction, cross-checks")
    pl.add_argument("--p", help="bernoulli bias for the source")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument(
        "--source",
        choices=("bernoulli", "file") + ADVERSARIAL_NAMES,
        default="bernoulli",
    )
    pl.add_argument("--p0")
    pl.add_argument("--p1")
    pl.add_argument("--in", dest="infile")
    pl.add_argument("--informat", choices=("text01", "packed"), default="text01")
    pl.add_argument("--d", type=int, default=1, help="starting coherence level")
    pl.add_argument("--budget", type=int, required=True, help="extraction level budget")
    pl.add_argument("--bits", type=int, required=True, help="digits to attempt")
    _add_format(pl)
    pl.set_defaults(handler=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        report = args.handler(args)
    except HippocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    fmt = "json" if getattr(args, "json", False) else getattr(args, "format", "json")
    if fmt not in ("json", "text"):
        fmt = "json"
    sys.stdout.write(emit_report(report, fmt))
    elapsed = time.perf_counter() - started
    print(f"[hippoc] {args.command} finished in {elapsed:.3f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

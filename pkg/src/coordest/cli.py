"""Command-line front end: sample, estimate, derive, verify, bench."""

from __future__ import annotations

import argparse
import csv
import importlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from . import __version__
from .estimators import HT, LSTAR, USTAR, EstimatorError, estimate, ht_may_be_inapplicable
from .functions import FunctionError, FunctionSpec, RgP, RgPPlus, make_function
from .order_optimal import OrderError, order_optimal_build
from .sampling import (
    SamplingError,
    ThresholdScheme,
    read_matrix_csv,
    read_samples,
    sample_matrix,
    write_samples,
)
from .verification import (
    SuiteConfig,
    aggregate_error_experiment,
    grid_vectors,
    property_suite,
    synthetic_matrix,
    tightness_family,
)


class CliError(Exception):
    pass


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _rationals(text: str) -> List[Fraction]:
    return [Fraction(x.strip()) for x in text.split(",") if x.strip()]


def _scheme_from_args(args, r: int) -> ThresholdScheme:
    if args.scheme == "full":
        return ThresholdScheme.full(r)
    if args.scheme == "step":
        if not args.breakpoints:
            raise CliError("--scheme step needs --breakpoints")
        bps = _rationals(args.breakpoints)
        lv = _rationals(args.levels) if args.levels else None
        return ThresholdScheme.step(bps, lv, r=r)
    tau = _floats(args.tau)
    if len(tau) == 1:
        tau = tau * r
    if len(tau) != r:
        raise CliError(f"--tau needs 1 or {r} values")
    if any(t <= 0 for t in tau):
        raise CliError("--tau rates must be positive")
    return ThresholdScheme.pps(tau)


def _load_seeds(path: str) -> Dict[str, float]:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return {str(k): float(v) for k, v in json.loads(text).items()}
    rows = list(csv.reader(text.splitlines()))
    if rows and rows[0] and rows[0][0] == "key":
        rows = rows[1:]
    return {row[0]: float(row[1]) for row in rows if row}


def _out(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text)


# sample


def cmd_sample(args) -> int:
    matrix = read_matrix_csv(args.input)
    r = len(next(iter(matrix.values()))) if matrix else max(1, len(_floats(args.tau)))
    scheme = _scheme_from_args(args, r)
    seeds = _load_seeds(args.inject_seeds) if args.inject_seeds else None
    samples = sample_matrix(matrix, scheme, args.salt, seeds=seeds)
    if args.output in (None, "-"):
        write_samples(samples, sys.stdout)
    else:
        with open(args.output, "w") as fh:
            write_samples(samples, fh)
    if args.output not in (None, "-"):
        print(f"wrote {len(samples)} items to {args.output}", file=sys.stderr)
    return 0


# estimate


def _load_custom(spec: str) -> FunctionSpec:
    mod, _, attr = spec.partition(":")
    obj = getattr(importlib.import_module(mod), attr)
    return obj() if callable(obj) and not isinstance(obj, FunctionSpec) else obj


def _query_function(args) -> FunctionSpec:
    if args.query in ("lpp", "lp"):
        return RgP(args.p)
    if args.query == "lpplus":
        return RgPPlus(args.p)
    if args.query == "custom":
        if not args.function:
            raise CliError("--query custom needs --function module:attr")
        return _load_custom(args.function)
    raise CliError(f"unknown query {args.query}")


def cmd_estimate(args) -> int:
    with open(args.samples) as fh:
        samples = read_samples(fh)
    if args.p <= 0:
        raise CliError("--p must be positive")
    fspec = _query_function(args)
    inst = [int(x) - 1 for x in args.instances.split(",")] if args.instances else list(range(samples.r))
    if any(not 0 <= i < samples.r for i in inst):
        raise CliError(f"instances must lie in 1..{samples.r}")
    if args.query == "lpplus" and len(inst) != 2:
        raise CliError("lpplus needs exactly two instances")
    wanted = None
    if args.keys:
        wanted = set(args.keys.split(","))
    elif args.keys_file:
        with open(args.keys_file) as fh:
            wanted = {ln.strip() for ln in fh if ln.strip()}
    records = [rec for rec in samples if wanted is None or rec.key in wanted]

    def one(rec):
        o = rec.outcome.project(inst)
        warn = args.estimator == HT and ht_may_be_inapplicable(fspec, o)
        try:
            return float(estimate(args.estimator, fspec, o)), None, warn
        except (EstimatorError, FunctionError) as exc:
            return 0.0, str(exc), warn

    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            results = list(pool.map(one, records))
    else:
        results = [one(r) for r in records]
    errors = {rec.key: err for rec, (_, err, _) in zip(records, results) if err}
    warn = [rec.key for rec, (_, _, w) in zip(records, results) if w]
    total = math.fsum(x for x, _, _ in results)
    nonzero = sum(1 for x, _, _ in results if x > 0)
    value = total ** (1.0 / args.p) if args.query == "lp" else total
    payload = {
        "query": args.query,
        "p": args.p,
        "estimator": args.estimator,
        "estimate": value,
        "items": len(records),
        "contributing_items": nonzero,
        "errors": errors,
    }
    if warn:
        payload["ht_zero_probability_items"] = warn
    if args.query == "lp":
        payload["note"] = "p-th root of an unbiased sum estimate; the root itself is biased"
    text = [f"{args.query}(p={args.p:g}) {args.estimator} estimate: {value:.10g}",
            f"items: {len(records)}  contributing: {nonzero}"]
    if args.query == "lp":
        text.append("note: " + payload["note"])
    for k, e in errors.items():
        text.append(f"item {k}: {e}")
    if warn:
        text.append(f"warning: {len(warn)} items have consistent data with zero reveal probability")
    _out(args, payload, "\n".join(text))
    return 1 if errors else 0


# derive


def cmd_derive(args) -> int:
    fspec = make_function(args.function, args.p)
    bps = _rationals(args.breakpoints)
    levels = _rationals(args.levels) if args.levels else list(range(1, len(bps) + 1))
    if args.domain:
        with open(args.domain) as fh:
            domain = [tuple(Fraction(str(x)) for x in z) for z in json.load(fh)]
    else:
        vals = [0] + list(levels)
        r = fspec.arity or 2
        domain = [()]
        for _ in range(r):
            domain = [z + (x,) for z in domain for x in vals]
    r = len(domain[0])
    scheme = ThresholdScheme.step(bps, levels, r=r)
    if args.order in ("lstar", "ustar"):
        order = args.order
    else:
        with open(args.order) as fh:
            order = [[tuple(Fraction(str(x)) for x in z) for z in chain] for chain in json.load(fh)]
    table = order_optimal_build(fspec, domain, scheme, order)
    obj = table.to_json()
    if args.output:
        with open(args.output, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
    _out(args, obj, table.listing())
    return 0


# verify / bench


def cmd_verify(args) -> int:
    fspec = make_function(args.function, args.p)
    r = fspec.arity or 2
    tau = _floats(args.tau)
    scheme = ThresholdScheme.pps(tau * r if len(tau) == 1 else tau)
    if r == 1:
        import numpy as np

        vectors = [(float(x),) for x in np.linspace(0, 1, args.grid)]
    else:
        vectors = grid_vectors(args.grid)
    rep = property_suite(SuiteConfig(fspec, scheme, vectors, check_range=not args.skip_range))
    _out(args, rep.to_json(), rep.text())
    return 0 if rep.passed else 1


def cmd_bench(args) -> int:
    if args.family == "tight":
        if not 0 <= args.p < 0.5:
            raise argparse.ArgumentTypeError("tight family needs 0 <= p < 0.5")
        res = tightness_family(args.p)
        bad = abs(res["ratio_numeric"] - res["ratio"]) > 1e-4 * res["ratio"]
        text = f"({res['opt_sm']:.4f}, {res['lstar_sm']:.4f}, {res['ratio']:.4f})"
        _out(args, res, text)
        return 1 if bad else 0
    fspec = make_function(args.function, args.p)
    matrix = synthetic_matrix(args.items, seed=args.data_seed)
    scheme = ThresholdScheme.pps([1.0, 1.0])
    sizes = [int(x) for x in args.sizes.split(",")]
    rows = aggregate_error_experiment(matrix, fspec, args.estimator, sizes, args.trials, scheme,
                                      salt_prefix=args.salt or "trial")
    lines = [f"{'size':>8}{'blocks':>8}{'rel_rmse':>12}"]
    lines += [f"{r.size:>8}{r.blocks:>8}{r.rel_rmse:>12.5f}" for r in rows]
    _out(args, {"rows": [r.__dict__ for r in rows]}, "\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, top):
        # subcommands repeat the flags without defaults so they do not mask top-level values
        d = (lambda x: x) if top else (lambda x: argparse.SUPPRESS)
        parser.add_argument("--salt", default=d(""), help="hash salt for seeds")
        parser.add_argument("--threads", type=int, default=d(1))
        parser.add_argument("--json", action="store_true", default=d(False), help="machine-readable output")

    common = argparse.ArgumentParser(add_help=False)
    global_flags(common, top=False)
    ap = argparse.ArgumentParser(prog="coordest",
                                 description="Coordinated-sampling estimators and sum queries")
    global_flags(ap, top=True)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def scheme_flags(p):
        p.add_argument("--scheme", choices=["pps", "step", "full"], default="pps")
        p.add_argument("--tau", default="1", help="PPS rates, one value or one per instance")
        p.add_argument("--breakpoints", help="step scheme breakpoints, e.g. 1/4,1/2,3/4")
        p.add_argument("--levels", help="step scheme levels (default 1..n)")

    p = sub.add_parser("sample", parents=[common], help="sample a CSV instance matrix")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    scheme_flags(p)
    p.add_argument("--inject-seeds", help=argparse.SUPPRESS)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("estimate", parents=[common], help="estimate a sum query from samples")
    p.add_argument("samples")
    p.add_argument("--query", choices=["lpp", "lp", "lpplus", "custom"], default="lpp")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--instances", help="1-based instance indices, e.g. 1,2")
    p.add_argument("--keys", help="comma-separated item keys (default: all)")
    p.add_argument("--keys-file")
    p.add_argument("--estimator", choices=[LSTAR, USTAR, HT], default=LSTAR)
    p.add_argument("--function", help="module:attr of a FunctionSpec for --query custom")
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("derive", parents=[common], help="build an order-optimal estimator table")
    p.add_argument("--function", default="rgplus")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--breakpoints", required=True)
    p.add_argument("--levels")
    p.add_argument("--domain", help="JSON list of vectors (default: full grid of levels)")
    p.add_argument("--order", default="lstar", help="lstar, ustar, or a JSON file of chains")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_derive)

    p = sub.add_parser("verify", parents=[common], help="run the estimator property suite")
    p.add_argument("--function", default="rgplus")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=50)
    p.add_argument("--tau", default="1")
    p.add_argument("--skip-range", action="store_true")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", parents=[common], help="tightness family or aggregate error")
    p.add_argument("--family", choices=["tight", "aggregate"], default="tight")
    p.add_argument("--p", type=float, default=0.25)
    p.add_argument("--function", default="rgplus")
    p.add_argument("--estimator", choices=[LSTAR, USTAR, HT], default=LSTAR)
    p.add_argument("--items", type=int, default=10000)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--sizes", default="100,1000,10000")
    p.add_argument("--data-seed", type=int, default=7)
    p.set_defaults(fn=cmd_bench)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.cmd == "bench" and args.family == "tight" and not 0 <= args.p < 0.5:
        ap.error("--p must satisfy 0 <= p < 0.5 for the tight family")
    try:
        return args.fn(args)
    except (CliError, SamplingError, FunctionError, OrderError, OSError, ValueError) as exc:
        print(f"coordest: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

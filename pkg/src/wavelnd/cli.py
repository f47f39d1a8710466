"""Command-line front door.

Exit codes: 0 success, 1 computation or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .field import (
    DomainBox,
    FieldError,
    FieldSpec,
    SpacetimePoint,
    covariance,
    covariance_direct_k1,
    covariance_spectral,
    sandwich_scan,
)
from .lnd import LndConfig, SphereRule, proof_grid_conditional_check, sectorial_check_k1, slnd_ratio_scan
from .modulus import ModulusConfig, entropy_scan, modulus_experiment
from .report import RunReport, render, utc_timestamp, write_report
from .sampler import BudgetError, GridSpec, build_grid, sample_field

OUT_DIR_ENV = "WAVELND_OUT_DIR"
COMMANDS = ("covariance", "sample", "verify-lnd", "sectorial", "proof-grid", "modulus", "entropy")


class UsageError(Exception):
    pass


def parse_point(text: str) -> tuple:
    """'t,x1,...,xk' -> (t, x1, ..., xk); decimal point only, no locale."""
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed point {text!r}; expected t,x1,...,xk")
    if len(vals) < 2 or not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"malformed point {text!r}; expected t,x1,...,xk")
    return vals


def parse_float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number list {text!r}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed seed {text!r}")
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("field and domain")
    g.add_argument("--k", type=int, default=1, help="spatial dimension (1, 2 or 3)")
    g.add_argument("--beta", type=float, default=1.0, help="Riesz exponent; k=1, beta=1 is white noise")
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--a-prime", type=float, default=2.0)
    g.add_argument("--b", type=float, default=1.0)
    o = common.add_argument_group("run")
    o.add_argument("--seed", type=_seed, default=0)
    o.add_argument("--out", default=None,
                   help=f"output file (default: ${OUT_DIR_ENV}/<command>.<format>, else stdout)")
    o.add_argument("--format", choices=("json", "csv"), default="json")
    o.add_argument("--threads", type=_positive_int, default=1, help="worker cap")
    o.add_argument("--timestamp", action="store_true", help="embed a UTC timestamp")

    parser = argparse.ArgumentParser(
        prog="wavelnd",
        description="Stochastic wave equation Gaussian field: covariance, sampling, "
                    "local nondeterminism and modulus-of-continuity checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("covariance", parents=[common], help="Cov(u(p), u(q))")
    p.add_argument("--p", type=parse_point, required=True, help="t,x1,...,xk")
    p.add_argument("--q", type=parse_point, required=True, help="t,x1,...,xk")
    p.add_argument("--engine", choices=("auto", "direct", "spectral"), default="auto")

    p = sub.add_parser("sample", parents=[common], help="exact samples on a grid or point list")
    p.add_argument("--points", default=None, help="semicolon-separated points t,x1,...;t,x1,...")
    p.add_argument("--nt", type=_positive_int, default=5)
    p.add_argument("--nx", type=_positive_int, default=5)
    p.add_argument("--n-samples", type=_positive_int, default=10)

    for name, helptext in (("verify-lnd", "strong local nondeterminism ratio scan"),
                           ("sectorial", "sectorial (k=1) nondeterminism ratio scan")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--trials", type=_positive_int, default=200)
        p.add_argument("--n-cond", type=_positive_int, default=8)
        p.add_argument("--delta", type=float, default=None, help="default a/2")
        if name == "verify-lnd":
            p.add_argument("--sphere-nodes", type=int, default=0)

    p = sub.add_parser("proof-grid", parents=[common], help="conditional variance on the dyadic grid")
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--C2", type=float, default=None, help="default: empirical sandwich C2")
    p.add_argument("--pairs", type=_positive_int, default=1000)

    p = sub.add_parser("modulus", parents=[common], help="J(eps) and K estimate")
    p.add_argument("--nt", type=_positive_int, default=40)
    p.add_argument("--nx", type=_positive_int, default=40)
    p.add_argument("--levels", type=_positive_int, default=6)
    p.add_argument("--n-samples", type=_positive_int, default=100)
    p.add_argument("--pairs", type=_positive_int, default=1000)
    p.add_argument("--entropy-n", type=int, default=0,
                   help="side of an entropy grid to scan as well (0: skip)")

    p = sub.add_parser("entropy", parents=[common], help="covering-number exponent")
    p.add_argument("--nt", type=_positive_int, default=60)
    p.add_argument("--nx", type=_positive_int, default=60)
    p.add_argument("--eps", type=parse_float_list, default=None, help="comma-separated radii")
    return parser


def _point(vals: tuple, k: int) -> SpacetimePoint:
    if len(vals) != k + 1:
        raise UsageError(f"point {','.join(map(repr, vals))} has {len(vals) - 1} spatial "
                         f"coordinates, expected k={k}")
    return SpacetimePoint(vals[0], vals[1:])


def _field_config(args, spec: FieldSpec, domain: DomainBox) -> dict:
    # threads and output location are excluded: they never change results
    return {"k": spec.k, "beta": spec.beta,
            "domain": {"a": domain.a, "a_prime": domain.a_prime, "b": domain.b}}


def _cmd_covariance(args, spec, domain):
    # stdout gets 15 significant digits, beyond which the engines carry no accuracy
    p, q = _point(args.p, spec.k), _point(args.q, spec.k)
    if args.engine == "direct":
        if spec.k != 1:
            raise UsageError("the direct engine exists for k = 1 only")
        val = covariance_direct_k1(spec, p, q)
    elif args.engine == "spectral":
        val = covariance_spectral(spec, p, q)
    else:
        val = covariance(spec, p, q)
    cfg = {"p": list(args.p), "q": list(args.q), "engine": args.engine}
    return RunReport("covariance", cfg, {"covariance": val}, seed=None,
                     table=(["covariance"], [[val]])), f"{val:.15g}"


def _cmd_sample(args, spec, domain):
    if args.points:
        pts = [_point(parse_point(s), spec.k) for s in args.points.split(";") if s.strip()]
        cfg = {"points": [list(p.as_array()) for p in pts]}
    else:
        pts = build_grid(GridSpec(domain, args.nt, args.nx), spec.k)
        cfg = {"nt": args.nt, "nx": args.nx}
    cfg["n_samples"] = args.n_samples
    s = sample_field(spec, pts, args.n_samples, args.seed, threads=args.threads)
    results = {"points": [p.as_array() for p in pts], "values": s.values,
               "applied_jitter": s.applied_jitter}
    # one column per point, labelled by its coordinates (t, x_1, ..., x_k)
    header = ["u(" + ",".join(repr(float(v)) for v in p.as_array()) + ")" for p in pts]
    rows = s.values.tolist()
    return RunReport("sample", cfg, results, seed=args.seed, table=(header, rows)), None


def _cmd_lnd(args, spec, domain):
    if args.n_cond > 8:
        raise UsageError("--n-cond must be at most 8")
    rule = None
    if args.command == "verify-lnd" and args.sphere_nodes:
        rule = SphereRule(spec.k, args.sphere_nodes)
    cfg = LndConfig(domain, delta=args.delta, n_conditioning=args.n_cond,
                    sphere_rule=rule, trials=args.trials, seed=args.seed)
    if args.command == "sectorial":
        if spec.k != 1:
            raise UsageError("sectorial requires --k 1")
        rep = sectorial_check_k1(spec, cfg, threads=args.threads)
    else:
        rep = slnd_ratio_scan(spec, cfg, threads=args.threads)
    conf = {"trials": cfg.trials, "n_conditioning": cfg.n_conditioning, "delta": cfg.delta,
            "sphere_nodes": (rule or SphereRule(spec.k)).n_nodes if args.command == "verify-lnd" else None}
    results = {"min_ratio": rep.min_ratio, "argmin_trial": rep.argmin_trial,
               "ratio_quantiles": rep.ratio_quantiles, "trials": rep.trials}
    header = ["trial", "n_conditioning", "conditional_variance", "bound", "ratio", "skipped"]
    rows = [[r["trial"], len(r["conditioning"]), r["conditional_variance"], r["bound_integral"],
             r["ratio"] if r["ratio"] is not None else "", r["skipped"]] for r in rep.trials]
    return RunReport(args.command, conf, results, seed=args.seed,
                     diagnostics=rep.diagnostics, table=(header, rows)), None


def _cmd_proof_grid(args, spec, domain):
    diag = {}
    C2 = args.C2
    if C2 is None:
        sw = sandwich_scan(spec, domain, args.pairs, seed=args.seed)
        C2 = sw["C2"]
        diag["sandwich"] = sw
    elif not C2 > 0:
        raise UsageError("--C2 must be positive")
    res = proof_grid_conditional_check(spec, domain, args.levels, C2)
    header = ["n", "n_points", "conditional_variance", "epsilon_sq", "ratio", "slnd_bound"]
    rows = [[lv[h] for h in header] for lv in res["levels"]]
    cfg = {"levels": args.levels, "C2": args.C2, "pairs": args.pairs}
    return RunReport("proof-grid", cfg, res, seed=args.seed, diagnostics=diag,
                     table=(header, rows)), None


def _cmd_modulus(args, spec, domain):
    ent = GridSpec(domain, args.entropy_n, args.entropy_n) if args.entropy_n > 0 else None
    cfg = ModulusConfig(domain, GridSpec(domain, args.nt, args.nx), n_levels=args.levels,
                        n_samples=args.n_samples, seed=args.seed, sandwich_pairs=args.pairs,
                        entropy_grid=ent)
    rep = modulus_experiment(spec, cfg, threads=args.threads)
    d = rep.to_dict()
    diag = d.pop("diagnostics")
    header = ["realization"] + [f"J_{m + 1}" for m in range(len(rep.epsilon_schedule))]
    rows = [[i, *row] for i, row in enumerate(rep.J_values.tolist())]
    conf = {"nt": args.nt, "nx": args.nx, "levels": args.levels, "n_samples": args.n_samples,
            "pairs": args.pairs, "entropy_n": args.entropy_n}
    return RunReport("modulus", conf, d, seed=args.seed, diagnostics=diag,
                     table=(header, rows)), None


def _cmd_entropy(args, spec, domain):
    g = GridSpec(domain, args.nt, args.nx)
    res = entropy_scan(spec, domain, g, args.eps, budget=max(g.size(spec.k), 3000))
    header = ["epsilon", "cover_count"]
    rows = [[lv["epsilon"], lv["cover_count"]] for lv in res["levels"]]
    conf = {"nt": args.nt, "nx": args.nx, "eps": args.eps}
    return RunReport("entropy", conf, res, seed=None, table=(header, rows)), None


HANDLERS = {
    "covariance": _cmd_covariance,
    "sample": _cmd_sample,
    "verify-lnd": _cmd_lnd,
    "sectorial": _cmd_lnd,
    "proof-grid": _cmd_proof_grid,
    "modulus": _cmd_modulus,
    "entropy": _cmd_entropy,
}


def _output_path(args) -> Optional[Path]:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env) / f"{args.command}.{args.format}"
    return None


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors
        return int(exc.code or 0)

    try:
        spec = FieldSpec(args.k, args.beta)
        domain = DomainBox(args.a, args.a_prime, args.b)
        report, text = HANDLERS[args.command](args, spec, domain)
    except (FieldError, UsageError, BudgetError, argparse.ArgumentTypeError) as exc:
        print(f"wavelnd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        err = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 1

    report.config = {**_field_config(args, spec, domain), **report.config}
    if args.timestamp:
        report.timestamp = utc_timestamp()
    path = _output_path(args)
    try:
        if path is None:
            sys.stdout.write(text + "\n" if text is not None else render(report, args.format))
        else:
            write_report(report, path, args.format)
            if text is not None:
                print(text)
    except Exception as exc:
        err = {"command": args.command, "error": type(exc).__name__, "message": str(exc),
               "path": str(path) if path else None}
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()

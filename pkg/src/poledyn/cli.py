"""Command-line entry point: ``poledyn <subcommand> --map MAP.json --out DIR``.

Every run writes its data files plus ``manifest.json`` and ``plots.json``
under ``--out``; ``--plot`` additionally renders PNG figures.

Exit codes: 0 success, 2 validation error, 3 precision exhausted,
4 interval budget exceeded, 1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import gmpy2
import numpy as np

from . import __version__
from .errors import BudgetExceeded, EpsilonTooLarge, InvariantViolation, PoleEvaluation, PoledynError, \
    PrecisionExhausted
from .experiments import (ExperimentConfig, density_estimate, disjointness_sweep, hitting_scaling_study,
                          logsq_conjecture_probe)
from .intervals import (IntervalSet, build_I0, containment_constants, glasser_measure_check, level_report,
                        merges, preimage_interval_set, pullback)
from .mapcore import load_map
from .orbit import first_hit_adaptive, iterate, itinerary_adaptive, theta_from_bits
from .plotting import describe
from .precision import Mode, PrecisionPolicy, default_bits, format_number, to_rational
from .report import cells_csv, write_csv, write_intervals_csv, write_json, write_orbit_csv

log = logging.getLogger("poledyn")

EXIT_OK, EXIT_ERROR, EXIT_VALIDATION, EXIT_PRECISION, EXIT_BUDGET = 0, 1, 2, 3, 4


def _policy(args, n_steps=0) -> PrecisionPolicy:
    bits = args.bits if args.bits is not None else default_bits(n_steps)
    kw = dict(bits=bits, shadow_margin_bits=args.margin)
    if args.tol is not None:
        kw["shadow_agreement_tol"] = float(to_rational(args.tol))
    if args.mode == "rational":
        return PrecisionPolicy(Mode.RATIONAL, **kw)
    return PrecisionPolicy(Mode.BIGFLOAT, **kw)


def cmd_orbit(args, spec, out):
    policy = _policy(args, args.n)
    orbit = iterate(spec, args.x0, args.n, policy, shadow=not args.no_shadow)
    write_orbit_csv(out / "orbit.csv", orbit)
    write_json(out / "orbit.json", orbit.summary())
    plots = [describe("orbit", "orbit.csv", "step", "value", title="orbit", symlog=True)]
    return policy, plots


def cmd_hit(args, spec, out):
    policy = _policy(args, args.n_max)
    rec = first_hit_adaptive(spec, args.x0, to_rational(args.eps), args.n_max, policy, args.max_bits)
    write_json(out / "hit.json", rec.summary())
    return policy, []


def cmd_pullback(args, spec, out):
    policy = _policy(args)
    levels = pullback(spec, args.eps, args.k, policy, args.budget)
    write_intervals_csv(out / "intervals.csv", levels)
    rows = level_report(spec, args.eps, levels)
    write_csv(out / "levels.csv", list(rows[0]), [list(r.values()) for r in rows])
    i0 = levels[0].measure
    write_json(out / "pullback.json", {
        "eps": args.eps,
        "k": args.k,
        "I0_measure": format_number(gmpy2.mpfr(i0, policy.bits)),
        "levels": rows,
        "max_discrepancy": max(r["discrepancy"] for r in rows),
        "merge_events": merges(levels),
        "precision_sufficient": merges(levels) == 0,
        "containment_constants": containment_constants(levels),
    })
    plots = [describe("intervals", "intervals.csv", "a", "level", kind="intervals", title="hitting sets I_k",
                      xlabel="x"),
             describe("radius", "levels.csv", "level", "radius", kind="scatter", title="containment radius")]
    return policy, plots


def cmd_glasser(args, spec, out):
    policy = _policy(args)
    if args.interval:
        with policy.context():
            S = IntervalSet.from_pairs([(policy.number(a), policy.number(b)) for a, b in args.interval])
    elif args.eps is not None:
        S = build_I0(spec, args.eps, policy)
    else:
        raise InvariantViolation("interval", "give --interval A B (repeatable) or --eps")
    pre = preimage_interval_set(spec, S, policy)
    disc = glasser_measure_check(spec, S, policy)
    write_csv(out / "preimage.csv", ["set", "index", "a", "b"],
              [("S", *r) for r in S.rows()] + [("preimage", *r) for r in pre.rows()])
    write_json(out / "glasser.json", {
        "measure": format_number(S.measure),
        "preimage_measure": format_number(pre.measure),
        "discrepancy": float(disc),
        "inflation_bound": float(pre.inflation),
        "intervals": len(S),
        "preimage_intervals": len(pre),
    })
    return policy, []


def _config(args, spec, values):
    policy = _policy(args)
    return ExperimentConfig(spec, seed=args.seed, samples=args.samples, values=tuple(values), c1=args.c1,
                            policy=policy, max_bits=args.max_bits, threads=args.threads)


def _hit_study_outputs(report, out, stem):
    write_json(out / f"{stem}.json", report.payload())
    cells_csv(out / f"{stem}.csv", report.cells,
              ["y", "samples", "valid", "hits", "fraction", "wilson95", "excluded.precision", "excluded.pole"])
    rows = [(c["y"], c["fraction"], c["wilson95"][0], c["wilson95"][1]) for c in report.cells]
    write_csv(out / f"{stem}_ci.csv", ["y", "fraction", "low", "high"], rows)
    return [describe(stem, f"{stem}_ci.csv", "y", "fraction", kind="errorbar", series=["low", "high"],
                     title="hit fraction with Wilson 95% interval")]


def cmd_density(args, spec, out):
    report = density_estimate(_config(args, spec, args.y))
    return report, _hit_study_outputs(report, out, "density")


def cmd_probe_logsq(args, spec, out):
    report = logsq_conjecture_probe(_config(args, spec, args.y))
    return report, _hit_study_outputs(report, out, "probe_logsq")


def cmd_scaling(args, spec, out):
    report = hitting_scaling_study(_config(args, spec, args.x0))
    write_json(out / "scaling.json", report.payload())
    cells_csv(out / "scaling.csv", report.cells, ["x0", "steps", "descent_rate", "heuristic_steps"])
    plots = [describe("scaling", "scaling.csv", "x0", ["steps", "heuristic_steps"], kind="scatter",
                      logx=True, logy=True, title="first entry time")]
    return report, plots


def cmd_disjoint(args, spec, out):
    policy = _policy(args)
    report = disjointness_sweep(spec, args.eps, args.k_max, policy, args.budget)
    write_json(out / "disjoint.json", report.payload())
    cells_csv(out / "disjoint.csv", report.cells, ["eps", "k_max", "window", "capped", "merge_events"])
    plots = []
    for i, cell in enumerate(report.cells):
        name = f"disjoint_{i}"
        n = len(cell["disjoint"])
        write_csv(out / f"{name}.csv", ["k", *range(n)], [[k, *row] for k, row in enumerate(cell["disjoint"])])
        plots.append(describe(name, f"{name}.csv", "k", "l", kind="matrix", title=f"disjoint pairs, eps={cell['eps']}"))
    return report, plots


def cmd_conjugacy(args, spec, out):
    if args.x0:
        seeds = list(args.x0)
    else:
        rng = np.random.Generator(np.random.Philox(key=args.seed))
        seeds = [repr(float(v)) for v in rng.uniform(-3.0, 3.0, args.seeds)]
    policy = _policy(args, args.n + 1)
    rows, cells = [], []
    for x0 in seeds:
        bits, used = itinerary_adaptive(spec, x0, args.n + 1, policy, args.max_bits)
        head, tail = bits[:-1], bits[1:]
        theta, theta_next = theta_from_bits(head), theta_from_bits(tail)
        gap = abs(theta_next - (2 * theta) % 1)
        ones = sum(head) / len(head)
        rows.append((x0, "".join(map(str, head)), float(theta), float(theta_next), float(gap), ones))
        cells.append({"x0": x0, "theta": float(theta), "shift_gap": float(gap), "monobit": ones, "bits": used.bits})
    write_csv(out / "conjugacy.csv", ["x0", "itinerary", "theta", "theta_next", "shift_gap", "monobit"], rows)
    monobit_ok = sum(1 for c in cells if 0.40 <= c["monobit"] <= 0.60)
    write_json(out / "conjugacy.json", {
        "n": args.n,
        "seeds": len(cells),
        "max_shift_gap": max(c["shift_gap"] for c in cells),
        "shift_bound": 2.0 ** -args.n,
        "monobit_in_band": monobit_ok,
        "cells": cells,
    })
    plots = [describe("conjugacy", "conjugacy.csv", "x0", "theta", kind="scatter", title="itinerary read-out")]
    return policy, plots


COMMANDS = {
    "orbit": (cmd_orbit, "Iterate the map with shadow verification and export the orbit."),
    "hit": (cmd_hit, "First step at which the orbit comes within eps of a pole "
                     "(the hitting predicate of the density theorem)."),
    "pullback": (cmd_pullback,
                 "Hitting sets I_k = f^-k(I_0): measures stay equal (Glasser measure preservation) and "
                 "I_k lies in [-c sqrt(k), c sqrt(k)]."),
    "glasser": (cmd_glasser, "Check |f^-1(S)| = |S| for an interval set S (Glasser's master theorem)."),
    "density": (cmd_density,
                "Positive-density hitting theorem: fraction of x in [-y, y] coming within 1/|x| of a "
                "pole within c1 x^2 steps."),
    "scaling": (cmd_scaling, "Slow-movement lemma and the x0^2 heuristic: first entry time into the pole "
                             "region and its log-log exponent."),
    "disjoint": (cmd_disjoint, "Disjointness lemma: I_k and I_l do not meet for nearby k, l; reports the window."),
    "conjugacy": (cmd_conjugacy, "Consequences of the conjugacy of x - 1/x with the doubling map: "
                                 "itinerary shift, binary read-out, monobit frequency."),
    "probe-logsq": (cmd_probe_logsq, "Exploratory: hitting fraction with the shorter x (log x)^2 budget."),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poledyn", description="Dynamics of x - sum a_i/(x - b_i).")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", required=True, help="JSON file {\"alphas\": [...], \"betas\": [...]}")
    common.add_argument("--out", default="poledyn-out", type=Path, help="output directory")
    common.add_argument("--mode", choices=["bigfloat", "rational"], default="bigfloat")
    common.add_argument("--bits", type=int, help="working precision (default from POLEDYN_DEFAULT_BITS or 128)")
    common.add_argument("--margin", type=int, default=128, help="extra shadow precision in bits")
    common.add_argument("--tol", help="shadow agreement tolerance (decimal string)")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--threads", type=int, default=1, help="worker processes; results do not depend on it")
    common.add_argument("--plot", action="store_true", help="render PNG figures with matplotlib")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name):
        fn, text = COMMANDS[name]
        p = sub.add_parser(name, parents=[common], help=text.split(":")[0], description=text)
        p.set_defaults(func=fn)
        return p

    p = add("orbit")
    p.add_argument("--x0", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--no-shadow", action="store_true")

    p = add("hit")
    p.add_argument("--x0", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--max-bits", type=int, default=4096)

    p = add("pullback")
    p.add_argument("--eps", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--budget", type=int, default=10**6)

    p = add("glasser")
    p.add_argument("--interval", nargs=2, action="append", metavar=("A", "B"))
    p.add_argument("--eps")

    for name in ("density", "probe-logsq"):
        p = add(name)
        p.add_argument("--y", nargs="+", required=True)
        p.add_argument("--c1", default="2")
        p.add_argument("--samples", type=int, default=2000)
        p.add_argument("--max-bits", type=int, default=4096)

    p = add("scaling")
    p.add_argument("--x0", nargs="+", required=True)
    p.add_argument("--c1", default="2")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--max-bits", type=int, default=4096)

    p = add("disjoint")
    p.add_argument("--eps", nargs="+", required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--budget", type=int, default=10**6)

    p = add("conjugacy")
    p.add_argument("--x0", nargs="*")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--max-bits", type=int, default=4096)
    return parser


def _flags(args) -> dict:
    skip = {"func", "out", "command", "map", "verbose", "plot"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        spec = load_map(args.map)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result, plots = args.func(args, spec, out)
    except OSError as exc:
        print(f"poledyn: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PoleEvaluation as exc:
        print(f"poledyn: seed or iterate is a pole: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InvariantViolation, EpsilonTooLarge) as exc:
        print(f"poledyn: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PrecisionExhausted as exc:
        print(f"poledyn: precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except BudgetExceeded as exc:
        print(f"poledyn: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PoledynError as exc:
        print(f"poledyn: {exc}", file=sys.stderr)
        return EXIT_ERROR

    policy = result if isinstance(result, PrecisionPolicy) else None
    write_json(out / "plots.json", plots)
    files = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
    manifest = {
        "command": args.command,
        "version": __version__,
        "map": spec.describe(),
        "flags": _flags(args),
        "policy": policy.describe() if policy else result.config.get("policy"),
        "files": files,
        "wall_time": time.perf_counter() - start,
    }
    if args.plot:
        from .plotting import render
        manifest["figures"] = [p.name for p in render(plots, out)]
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Seeded, reproducible studies built on the orbit and pullback machinery."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np
from scipy.stats import binomtest

from .errors import EpsilonTooLarge, InvariantViolation, PoleEvaluation, PrecisionExhausted
from .intervals import disjointness_window, merges, pairwise_disjoint, pullback
from .mapcore import MapSpec, c1_constant, epsilon0
from .orbit import first_entry, first_hit_adaptive
from .precision import PrecisionPolicy, format_number, to_rational

log = logging.getLogger(__name__)

QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one study; ``values`` are y values or seeds depending on the study."""

    spec: MapSpec
    seed: int = 42
    samples: int = 2000
    values: tuple = ()
    c1: object = 2
    policy: PrecisionPolicy = field(default_factory=lambda: PrecisionPolicy.bigfloat(256))
    max_bits: int = 4096
    threads: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise InvariantViolation("samples", "must be >= 1")
        c1 = to_rational(repr(self.c1) if isinstance(self.c1, float) else self.c1)
        if not c1 > 0:
            raise InvariantViolation("c1", "must be positive")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "values", tuple(self.values))
        if not 0 <= self.seed < 2**64:
            raise InvariantViolation("seed", "must fit in 64 bits")

    def describe(self) -> dict:
        return {
            "map": self.spec.describe(),
            "seed": self.seed,
            "samples": self.samples,
            "values": [_text(v) for v in self.values],
            "c1": format_number(self.c1),
            "policy": self.policy.describe(),
            "max_bits": self.max_bits,
        }


def _text(v):
    return v if isinstance(v, str) else format_number(to_rational(repr(v) if isinstance(v, float) else v))


@dataclass
class ExperimentReport:
    name: str
    config: dict
    cells: list
    failures: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def payload(self) -> dict:
        """Everything except wall time; identical configs give identical payloads."""
        return {"experiment": self.name, "config": self.config, "cells": self.cells,
                "failures": self.failures, "summary": self.summary}

    def payload_json(self) -> str:
        return json.dumps(self.payload(), sort_keys=True, indent=2)

    def to_dict(self) -> dict:
        d = self.payload()
        d["wall_time"] = self.wall_time
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def sample_points(seed: int, cell: int, y: float, samples: int) -> np.ndarray:
    """Uniform points in [-y, y] from a Philox stream keyed by (seed, cell)."""
    rng = np.random.Generator(np.random.Philox(key=seed | (cell << 64)))
    return y * (2.0 * rng.random(samples) - 1.0)


def _quadratic(c1, x: float) -> int:
    return math.floor(c1 * Fraction(x) ** 2)


def quadratic_budget(c1):
    """floor(c1 * x**2), computed exactly; picklable for worker processes."""
    return partial(_quadratic, Fraction(int(c1.numerator), int(c1.denominator)) if hasattr(c1, "denominator")
                   else Fraction(c1))


def logsq_budget(x: float) -> int:
    """floor(|x| (log |x|)**2)."""
    ax = abs(x)
    if ax == 0:
        return 0
    return math.floor(ax * math.log(ax) ** 2)


def _membership(spec, x, budget, policy, max_bits):
    """Outcome of the hitting predicate for one sample: (status, n_hit, bits)."""
    n_max = budget(x)
    if n_max < 1:
        return "miss", None, policy.bits
    eps = 1 / abs(Fraction(x))
    try:
        rec = first_hit_adaptive(spec, x, eps, n_max, policy, max_bits)
    except PoleEvaluation:
        return "pole", None, policy.bits
    except PrecisionExhausted:
        return "precision", None, max_bits
    return rec.status, rec.n_hit, rec.bits


def _membership_batch(args):
    spec, xs, budget, policy, max_bits = args
    return [_membership(spec, float(x), budget, policy, max_bits) for x in xs]


def _evaluate(config, xs, budget):
    if config.threads <= 1:
        return _membership_batch((config.spec, xs, budget, config.policy, config.max_bits))
    chunks = np.array_split(xs, config.threads * 4)
    with ProcessPoolExecutor(max_workers=config.threads) as pool:
        parts = pool.map(_membership_batch,
                         [(config.spec, c, budget, config.policy, config.max_bits) for c in chunks])
        return [r for part in parts for r in part]


def _hit_fraction_study(name, config, budget, budget_text):
    start = time.perf_counter()
    if not config.values:
        raise InvariantViolation("values", "at least one y value is required")
    cells = []
    failures = {"precision": 0, "pole": 0}
    for cell, y in enumerate(config.values):
        yf = float(to_rational(repr(y) if isinstance(y, float) else y))
        if not yf > 0:
            raise InvariantViolation("values", f"y must be positive, got {y}")
        xs = sample_points(config.seed, cell, yf, config.samples)
        outcomes = _evaluate(config, xs, budget)
        hits = [n for status, n, _ in outcomes if status == "hit"]
        excluded = {"precision": 0, "pole": 0}
        for status, _, _ in outcomes:
            if status in excluded:
                excluded[status] += 1
        for key in failures:
            failures[key] += excluded[key]
        valid = config.samples - excluded["precision"] - excluded["pole"]
        frac = len(hits) / valid if valid else 0.0
        low, high = wilson_interval(len(hits), valid)
        quantiles = ([float(q) for q in np.quantile(hits, QUANTILES, method="lower")]
                     if hits else [None] * len(QUANTILES))
        cells.append({
            "y": _text(y),
            "samples": config.samples,
            "valid": valid,
            "hits": len(hits),
            "fraction": frac,
            "wilson95": [low, high],
            "excluded": excluded,
            "hit_time_quantiles": dict(zip((str(q) for q in QUANTILES), quantiles)),
            "max_bits_used": max(b for _, _, b in outcomes),
        })
        log.info("%s y=%s fraction=%.4f (%d/%d)", name, y, frac, len(hits), valid)
    total = config.samples * len(config.values)
    summary = {
        "budget": budget_text,
        "min_fraction": min(c["fraction"] for c in cells),
        "exclusion_rate": (failures["precision"] + failures["pole"]) / total,
    }
    return ExperimentReport(name, config.describe(), cells, failures, summary, time.perf_counter() - start)


def density_estimate(config: ExperimentConfig) -> ExperimentReport:
    """Fraction of x in [-y, y] reaching within 1/|x| of a pole in [1, c1 x**2] steps."""
    return _hit_fraction_study("density", config, quadratic_budget(config.c1),
                               f"floor({format_number(config.c1)} * x^2)")


def logsq_conjecture_probe(config: ExperimentConfig) -> ExperimentReport:
    """Same predicate with the shorter budget floor(|x| (log|x|)**2). Exploratory."""
    return _hit_fraction_study("probe-logsq", config, logsq_budget, "floor(|x| * log(|x|)^2)")


def hitting_scaling_study(config: ExperimentConfig) -> ExperimentReport:
    """First entry into [b_1 - 1, b_m + 1] from each x0; log-log fit of steps against x0."""
    start = time.perf_counter()
    spec = config.spec
    lo, hi = spec.betas[0] - 1, spec.betas[-1] + 1
    c1 = c1_constant(spec)
    cells = []
    failures = {"precision": 0, "no_entry": 0}
    for v in config.values:
        x0 = to_rational(repr(v) if isinstance(v, float) else v)
        if spec.betas[0] - c1 < x0 < spec.betas[-1] + c1:
            raise InvariantViolation("values", f"x0 = {format_number(x0)} is not beyond the poles by c1 = "
                                     f"{format_number(c1)}")
        edge = hi if x0 > 0 else lo
        n_max = math.floor(config.c1 * x0 * x0) + 16
        try:
            steps = first_entry(spec, x0, lo, hi, n_max, config.policy)
        except PrecisionExhausted:
            failures["precision"] += 1
            steps = None
        else:
            if steps is None:
                failures["no_entry"] += 1
        rate = float((x0 * x0 - edge * edge) / steps) if steps else None
        cells.append({"x0": format_number(x0), "steps": steps, "descent_rate": rate,
                      "heuristic_steps": float((x0 * x0 - edge * edge) / (2 * spec.alpha_sum))})
    good = [(float(to_rational(c["x0"])), c["steps"]) for c in cells if c["steps"]]
    summary = {"expected_descent_rate": float(2 * spec.alpha_sum), "entry_interval": [float(lo), float(hi)]}
    if len(good) >= 2:
        lx = np.log([abs(x) for x, _ in good])
        ls = np.log([s for _, s in good])
        p, log_a = np.polyfit(lx, ls, 1)
        summary.update(exponent=float(p), prefactor=float(math.exp(log_a)))
    rates = [c["descent_rate"] for c in cells if c["descent_rate"] is not None]
    if rates:
        summary["mean_descent_rate"] = float(np.mean(rates))
    return ExperimentReport("scaling", config.describe(), cells, failures, summary, time.perf_counter() - start)


def disjointness_sweep(spec: MapSpec, eps_list, k_max: int, policy: PrecisionPolicy | None = None,
                       budget: int = 10**6) -> ExperimentReport:
    """Largest window w(eps) with I_k and I_l disjoint whenever 1 <= |k - l| <= w."""
    start = time.perf_counter()
    policy = policy or PrecisionPolicy.bigfloat(256)
    e0 = epsilon0(spec)
    eps_exact = [to_rational(repr(e) if isinstance(e, float) else e) for e in eps_list]
    for e in eps_exact:
        if not e < e0:
            raise EpsilonTooLarge(f"eps = {format_number(e)} is not below epsilon0 = {format_number(e0)}")
    cells = []
    for e in eps_exact:
        levels = pullback(spec, e, k_max, policy, budget)
        matrix = pairwise_disjoint(levels)
        w = disjointness_window(matrix)
        cells.append({
            "eps": format_number(e),
            "k_max": k_max,
            "window": w,
            "capped": w == k_max,
            "merge_events": merges(levels),
            "disjoint": matrix.astype(int).tolist(),
        })
    by_eps = sorted(cells, key=lambda c: to_rational(c["eps"]), reverse=True)
    windows = [c["window"] for c in by_eps]
    summary = {
        "epsilon0": format_number(e0),
        "window_monotone": all(a <= b for a, b in zip(windows, windows[1:])),
        "precision_sufficient": all(c["merge_events"] == 0 for c in cells),
    }
    config = {"map": spec.describe(), "eps": [format_number(e) for e in eps_exact], "k_max": k_max,
              "policy": policy.describe(), "budget": budget}
    return ExperimentReport("disjoint", config, cells, {}, summary, time.perf_counter() - start)

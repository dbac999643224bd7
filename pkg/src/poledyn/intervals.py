"""Finite unions of closed intervals and their pullbacks under the map.

I_0 is the union of the eps-neighbourhoods of the poles and
I_{k+1} = f^{-1}(I_k). Each branch of f is increasing, so the preimage of
[a, b] on a branch is [x(a), x(b)] and a level holds m (m+1)^k intervals.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import gmpy2
import numpy as np
from gmpy2 import mpq

from .errors import BudgetExceeded, EpsilonTooLarge, InvariantViolation
from .mapcore import INF, MapSpec, branches, coefficients, make_step, preimage_in_branch
from .precision import PrecisionPolicy, format_number, to_rational, ulp

log = logging.getLogger(__name__)

MERGE_ULPS = 4
DEFAULT_INTERVAL_BUDGET = 10**6


@dataclass(frozen=True)
class MergeEvent:
    """Two intervals closer than the merge threshold were fused."""

    left: tuple
    right: tuple

    def describe(self) -> dict:
        return {"left": [format_number(v) for v in self.left], "right": [format_number(v) for v in self.right]}


def _exact(v):
    return mpq(v) if isinstance(v, type(gmpy2.mpfr())) else to_rational(v)


def _gap_threshold(a, b):
    if isinstance(a, type(gmpy2.mpfr())):
        return MERGE_ULPS * mpq(max(ulp(a), ulp(b)))
    return 0


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, pairwise disjoint closed intervals.

    ``measure`` is the exact sum of lengths of the stored endpoints.
    ``inflation`` bounds how much outward rounding added to the measure
    across every pullback that produced this set.
    """

    intervals: tuple = ()
    measure: object = mpq(0)
    inflation: object = mpq(0)
    merge_events: tuple = field(default=(), compare=False)

    @classmethod
    def from_pairs(cls, pairs, inflation=mpq(0)) -> IntervalSet:
        items = sorted((a, b) for a, b in pairs)
        for a, b in items:
            if not a <= b:
                raise InvariantViolation("intervals", f"empty interval [{format_number(a)}, {format_number(b)}]")
        merged = []
        events = []
        for a, b in items:
            if merged:
                pa, pb = merged[-1]
                if _exact(a) - _exact(pb) <= _gap_threshold(pb, a):
                    events.append(MergeEvent((pa, pb), (a, b)))
                    merged[-1] = (pa, max(pb, b))
                    continue
            merged.append((a, b))
        for ev in events:
            log.warning("merged intervals %s", ev.describe())
        measure = sum((_exact(b) - _exact(a) for a, b in merged), mpq(0))
        return cls(tuple(merged), measure, to_rational(inflation), tuple(events))

    @classmethod
    def empty(cls) -> IntervalSet:
        return cls()

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def contains(self, x) -> bool:
        lo, hi = 0, len(self.intervals)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.intervals[mid][1] < x:
                lo = mid + 1
            else:
                hi = mid
        return lo < len(self.intervals) and self.intervals[lo][0] <= x

    def boundary_distance(self, x):
        """Distance from ``x`` to the nearest endpoint."""
        if not self.intervals:
            return INF
        q = _exact(x)
        ends = self._endpoints
        i = bisect.bisect_left(ends, q)
        return min(abs(q - ends[j]) for j in (i - 1, i) if 0 <= j < len(ends))

    @cached_property
    def _endpoints(self):
        return [_exact(v) for pair in self.intervals for v in pair]

    def intersects(self, other: IntervalSet) -> bool:
        """Two-pointer sweep over both sorted lists."""
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            if a[i][1] < b[j][0]:
                i += 1
            elif b[j][1] < a[i][0]:
                j += 1
            else:
                return True
        return False

    def max_abs(self):
        if not self.intervals:
            return mpq(0)
        return max(abs(_exact(self.intervals[0][0])), abs(_exact(self.intervals[-1][1])))

    def rows(self):
        return [(i, format_number(a), format_number(b)) for i, (a, b) in enumerate(self.intervals)]


def build_I0(spec: MapSpec, eps, policy: PrecisionPolicy | None = None) -> IntervalSet:
    """Union of [b_i - eps, b_i + eps] over the poles."""
    policy = policy or PrecisionPolicy.bigfloat(256)
    e = to_rational(repr(eps) if isinstance(eps, float) else eps)
    if not e > 0:
        raise InvariantViolation("eps", "must be positive")
    if spec.pole_gap != INF and not e < spec.pole_gap / 2:
        raise EpsilonTooLarge(f"eps = {format_number(e)} must be below half the pole gap "
                              f"{format_number(spec.pole_gap / 2)}")
    with policy.context():
        pairs = [(policy.number(b - e), policy.number(b + e)) for b in spec.betas]
    return IntervalSet.from_pairs(pairs)


def _outward(a, b):
    if isinstance(a, type(gmpy2.mpfr())):
        lo, hi = gmpy2.next_below(a), gmpy2.next_above(b)
        return lo, hi, (mpq(a) - mpq(lo)) + (mpq(hi) - mpq(b))
    return a, b, mpq(0)


def preimage_interval_set(spec: MapSpec, S: IntervalSet, policy: PrecisionPolicy | None = None) -> IntervalSet:
    """f^{-1}(S), one interval per (interval, branch) pair, endpoints rounded outward."""
    policy = policy or PrecisionPolicy.bigfloat(256)
    pairs = []
    added = mpq(0)
    for br in branches(spec):
        for a, b in S.intervals:
            xa = preimage_in_branch(spec, a, br, policy)
            xb = xa if b == a else preimage_in_branch(spec, b, br, policy)
            with policy.context():
                lo, hi, extra = _outward(xa, xb)
            added += extra
            pairs.append((lo, hi))
    return IntervalSet.from_pairs(pairs, inflation=S.inflation + added)


def interval_count(spec: MapSpec, k: int) -> int:
    return spec.m * (spec.m + 1) ** k


def pullback(spec: MapSpec, eps, k: int, policy: PrecisionPolicy | None = None,
             budget: int = DEFAULT_INTERVAL_BUDGET) -> list[IntervalSet]:
    """[I_0, ..., I_k] by repeated preimages of I_0."""
    if k < 0:
        raise InvariantViolation("k", "must be non-negative")
    if interval_count(spec, k) > budget:
        raise BudgetExceeded(f"level {k} needs {interval_count(spec, k)} intervals, budget {budget}")
    policy = policy or PrecisionPolicy.bigfloat(256)
    levels = [build_I0(spec, eps, policy)]
    for _ in range(k):
        levels.append(preimage_interval_set(spec, levels[-1], policy))
    return levels


def merges(levels) -> int:
    """Total merge events; any merge means the precision was insufficient."""
    return sum(len(s.merge_events) for s in levels)


def pairwise_disjoint(sets) -> np.ndarray:
    """Boolean matrix whose (k, l) entry says I_k and I_l do not meet."""
    n = len(sets)
    out = np.zeros((n, n), dtype=bool)
    for i in range(n):
        # a non-empty set always meets itself
        out[i, i] = not sets[i]
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = not sets[i].intersects(sets[j])
    return out


def disjointness_window(matrix) -> int:
    """Largest w with every pair 1 <= |k - l| <= w disjoint."""
    n = len(matrix)
    for d in range(1, n):
        if not all(matrix[i][i + d] for i in range(n - d)):
            return d - 1
    return n - 1


def glasser_measure_check(spec: MapSpec, S: IntervalSet, policy: PrecisionPolicy | None = None):
    """|measure(f^{-1}(S)) - measure(S)|, exactly, for the computed endpoints."""
    if S.intervals and (S.intervals[0][0] in (-INF, INF) or S.intervals[-1][1] in (-INF, INF)):
        raise InvariantViolation("S", "interval set must be bounded")
    pre = preimage_interval_set(spec, S, policy)
    return abs(pre.measure - S.measure)


def containment_radius(S: IntervalSet):
    return S.max_abs()


def containment_constants(levels) -> list[float | None]:
    """R_k / sqrt(k) for k >= 1, where I_k lies inside [-R_k, R_k]."""
    return [None] + [float(s.max_abs()) / math.sqrt(k) for k, s in enumerate(levels) if k >= 1]


def member_by_simulation(spec: MapSpec, x, k: int, eps, policy: PrecisionPolicy) -> bool:
    """min_i |f^k(x) - b_i| <= eps by direct iteration (no interval machinery)."""
    _, betas = coefficients(spec, policy)
    step = make_step(spec, policy)
    with policy.context():
        v = policy.number(x)
        e = policy.number(eps)
        for _ in range(k):
            if any(v == b for b in betas):
                return False
            v = step(v)
        return min(abs(v - b) for b in betas) <= e


def level_report(spec: MapSpec, eps, levels) -> list[dict]:
    i0 = levels[0].measure
    rows = []
    for k, s in enumerate(levels):
        rows.append({
            "level": k,
            "intervals": len(s),
            "expected_intervals": interval_count(spec, k),
            "measure": format_number(gmpy2.mpfr(s.measure, 256)),
            "discrepancy": float(abs(s.measure - i0)),
            "inflation_bound": float(s.inflation),
            "radius": float(s.max_abs()),
            "merge_events": len(s.merge_events),
        })
    return rows

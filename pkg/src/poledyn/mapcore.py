"""The rational map family f(x) = x - sum_i a_i / (x - b_i).

Every a_i is positive, so f'(x) = 1 + sum_i a_i / (x - b_i)**2 > 1 away from
the poles. Between consecutive poles (and beyond the extreme ones) f tends to
-inf at the left end and +inf at the right end, hence each of the m + 1
branches is an increasing bijection onto the reals. Preimages are found per
branch with a guaranteed bracket.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from gmpy2 import mpfr, mpq

from .errors import BracketFailure, InvariantViolation, PoleEvaluation, PrecisionExhausted
from .precision import PrecisionPolicy, format_number, to_rational

INF = float("inf")


@dataclass(frozen=True)
class MapSpec:
    """Parameters of one map in the family. Coefficients are stored exactly."""

    alphas: tuple
    betas: tuple
    alpha_sum: object = field(init=False, compare=False, repr=False)
    pole_gap: object = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        alphas = tuple(to_rational(a) for a in self.alphas)
        betas = tuple(to_rational(b) for b in self.betas)
        if not alphas:
            raise InvariantViolation("alphas", "at least one pole is required")
        if len(alphas) != len(betas):
            raise InvariantViolation("betas", f"expected {len(alphas)} values, got {len(betas)}")
        for i, a in enumerate(alphas):
            if a <= 0:
                raise InvariantViolation("alphas", f"alphas[{i}] = {format_number(a)} must be > 0")
        for i in range(1, len(betas)):
            if betas[i] == betas[i - 1]:
                raise InvariantViolation("betas", f"poles must be distinct; betas[{i}] repeats {format_number(betas[i])}")
            if betas[i] < betas[i - 1]:
                raise InvariantViolation(
                    "betas", f"poles must be strictly increasing (sort betas and their alphas together); "
                    f"betas[{i}] < betas[{i - 1}]")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_sum", sum(alphas, mpq(0)))
        gaps = [betas[i + 1] - betas[i] for i in range(len(betas) - 1)]
        object.__setattr__(self, "pole_gap", min(gaps) if gaps else INF)

    @property
    def m(self) -> int:
        return len(self.alphas)

    @property
    def is_graham(self) -> bool:
        return self.alphas == (1,) and self.betas == (0,)

    @property
    def spread(self):
        return self.betas[-1] - self.betas[0]

    @classmethod
    def graham(cls) -> MapSpec:
        return cls(("1",), ("0",))

    @classmethod
    def from_dict(cls, data: dict) -> MapSpec:
        try:
            alphas, betas = data["alphas"], data["betas"]
        except (KeyError, TypeError):
            raise InvariantViolation("map", "expected an object with 'alphas' and 'betas'") from None
        if not isinstance(alphas, list) or not isinstance(betas, list):
            raise InvariantViolation("map", "'alphas' and 'betas' must be lists")
        for name, values in (("alphas", alphas), ("betas", betas)):
            for v in values:
                if isinstance(v, float):
                    raise InvariantViolation(name, f"use decimal strings, not JSON floats ({v!r})")
        return cls(tuple(alphas), tuple(betas))

    def to_dict(self) -> dict:
        return {"alphas": [_decimal(a) for a in self.alphas], "betas": [_decimal(b) for b in self.betas]}

    def describe(self) -> dict:
        d = self.to_dict()
        d["m"] = self.m
        d["alpha_sum"] = _decimal(self.alpha_sum)
        d["pole_gap"] = "inf" if self.pole_gap == INF else _decimal(self.pole_gap)
        return d


def _decimal(q) -> str:
    """Exact decimal string when the rational terminates, else ``p/q``."""
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return format_number(q)
    scale = max(twos, fives)
    digits = q.numerator * 10**scale // q.denominator
    if scale == 0:
        return str(digits)
    sign = "-" if digits < 0 else ""
    s = str(abs(digits)).rjust(scale + 1, "0")
    return f"{sign}{s[:-scale]}.{s[-scale:]}".rstrip("0").rstrip(".")


def load_map(path) -> MapSpec:
    """Parse and validate a map file of decimal-string coefficients."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvariantViolation("map", f"invalid JSON in {path}: {exc}") from None
    return MapSpec.from_dict(data)


validate_map_file = load_map


def save_map(spec: MapSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict()) + "\n")


@dataclass(frozen=True)
class Branch:
    """Open interval (lower, upper) between consecutive poles."""

    index: int
    lower: object
    upper: object

    @property
    def bounded(self) -> bool:
        return self.lower != -INF and self.upper != INF


def branches(spec: MapSpec) -> list[Branch]:
    b = spec.betas
    edges = [-INF, *b, INF]
    return [Branch(i, edges[i], edges[i + 1]) for i in range(spec.m + 1)]


@lru_cache(maxsize=256)
def _coefficients(spec: MapSpec, policy: PrecisionPolicy):
    return tuple(policy.number(a) for a in spec.alphas), tuple(policy.number(b) for b in spec.betas)


def coefficients(spec: MapSpec, policy: PrecisionPolicy):
    """(alphas, betas) converted to the policy's number type."""
    return _coefficients(spec, policy)


def pole_index(betas, x):
    for i, b in enumerate(betas):
        if x == b:
            return i
    return None


def make_step(spec: MapSpec, policy: PrecisionPolicy):
    """Fast ``x -> f(x)`` for use inside ``policy.context()``.

    The returned function does not test for poles; callers check with
    :func:`pole_index` first.
    """
    alphas, betas = coefficients(spec, policy)
    if spec.is_graham:
        return lambda x: x - 1 / x
    if spec.m == 1:
        a, b = alphas[0], betas[0]
        return lambda x: x - a / (x - b)
    pairs = tuple(zip(alphas, betas))

    def step(x):
        s = 0
        for a, b in pairs:
            s += a / (x - b)
        return x - s

    return step


def _raw_derivative(pairs, x):
    s = 1
    for a, b in pairs:
        d = x - b
        s += a / (d * d)
    return s


def eval_map(spec: MapSpec, x, policy: PrecisionPolicy):
    """f(x) at the policy's precision; exact for rational input in rational mode."""
    with policy.context():
        x = policy.number(x)
        alphas, betas = coefficients(spec, policy)
        i = pole_index(betas, x)
        if i is not None:
            raise PoleEvaluation(i, x)
        return make_step(spec, policy)(x)


def eval_derivative(spec: MapSpec, x, policy: PrecisionPolicy):
    """f'(x) = 1 + sum_i a_i / (x - b_i)**2, always greater than one."""
    with policy.context():
        x = policy.number(x)
        alphas, betas = coefficients(spec, policy)
        i = pole_index(betas, x)
        if i is not None:
            raise PoleEvaluation(i, x)
        return _raw_derivative(tuple(zip(alphas, betas)), x)


def branch_of(spec: MapSpec, x) -> Branch:
    """The branch whose open interval contains ``x``."""
    q = to_rational(x)
    for i, b in enumerate(spec.betas):
        if q == b:
            raise PoleEvaluation(i, x)
        if q < b:
            return branches(spec)[i]
    return branches(spec)[spec.m]


def _expansion_limit(policy: PrecisionPolicy) -> int:
    return 4 * policy.bits + 256


def _bracket(spec, y, branch, policy, step):
    """Points lo < hi inside ``branch`` with f(lo) <= y <= f(hi)."""
    num = policy.number
    _, betas = coefficients(spec, policy)
    if spec.m == 1:
        base = num(1)
    else:
        base = num(spec.pole_gap) / 2
    limit = _expansion_limit(policy)

    def toward_pole(pole, sign, want_below):
        # sign = +1 approaches the pole from the right, -1 from the left
        h = base if not branch.bounded else num(betas[branch.index] - betas[branch.index - 1]) / 2
        for _ in range(limit):
            x = pole + sign * h
            if x == pole:
                raise PrecisionExhausted(f"preimage of {format_number(y)} is within one ulp of a pole")
            fx = step(x)
            if (fx <= y) if want_below else (fx >= y):
                return x, fx
            h = h / 2
        raise BracketFailure(f"bracket toward pole failed for y={format_number(y)} on branch {branch.index}")

    def outward(pole, sign, want_below):
        h = base
        for _ in range(limit):
            x = pole + sign * h
            fx = step(x)
            if (fx <= y) if want_below else (fx >= y):
                return x, fx
            h = h * 2
        raise BracketFailure(f"outward bracket failed for y={format_number(y)} on branch {branch.index}")

    i = branch.index
    if i == 0:
        lo = outward(betas[0], -1, True)
    else:
        lo = toward_pole(betas[i - 1], 1, True)
    if i == spec.m:
        hi = outward(betas[-1], 1, False)
    else:
        hi = toward_pole(betas[i], -1, False)
    return lo, hi


def preimage_in_branch(spec: MapSpec, y, branch: Branch, policy: PrecisionPolicy):
    """The unique x in ``branch`` with f(x) = y.

    Bracketed Newton iteration: every step keeps f(lo) < y < f(hi) and falls
    back to bisection whenever the Newton point leaves the bracket. Rational
    mode uses plain bisection so iterates stay dyadic.
    """
    if not 0 <= branch.index <= spec.m:
        raise InvariantViolation("branch", f"index {branch.index} out of range for m={spec.m}")
    with policy.context():
        y = policy.number(y)
        alphas, betas = coefficients(spec, policy)
        pairs = tuple(zip(alphas, betas))
        step = make_step(spec, policy)
        (lo, flo), (hi, fhi) = _bracket(spec, y, branch, policy, step)
        if flo == y:
            return lo
        if fhi == y:
            return hi
        half_bits = policy.bits // 2
        target = policy.number(mpq(1, 2**half_bits)) * max(policy.number(1), abs(y))
        limit = _expansion_limit(policy)
        if policy.exact:
            return _bisect_exact(step, y, lo, hi, target, limit)
        return _newton_bracketed(step, pairs, y, lo, hi, target, policy.bits, limit)


def _bisect_exact(step, y, lo, hi, target, limit):
    for _ in range(limit):
        mid = (lo + hi) / 2
        r = step(mid) - y
        if abs(r) <= target:
            return mid
        if r < 0:
            lo = mid
        else:
            hi = mid
    raise PrecisionExhausted(f"bisection did not reach residual {format_number(target)}")


def _newton_bracketed(step, pairs, y, lo, hi, target, bits, limit):
    x = (lo + hi) / 2
    close = mpfr(2) ** (4 - bits)
    for _ in range(limit):
        r = step(x) - y
        if r == 0:
            return x
        if r < 0:
            lo = x
        else:
            hi = x
        dx = r / _raw_derivative(pairs, x)
        if abs(dx) <= close * max(abs(x), 1):
            return _accept(step, y, x, target)
        xn = x - dx
        if not lo < xn < hi:
            xn = (lo + hi) / 2
            if xn == lo or xn == hi:
                # bracket collapsed to adjacent floats
                return _accept(step, y, x, target)
        x = xn
    raise PrecisionExhausted("bracketed Newton iteration did not converge")


def _accept(step, y, x, target):
    if abs(step(x) - y) > target:
        raise PrecisionExhausted(
            f"residual {format_number(abs(step(x) - y))} above target {format_number(target)}")
    return x


def preimages_all(spec: MapSpec, y, policy: PrecisionPolicy) -> list:
    """All m + 1 preimages of ``y``, increasing and interlaced with the poles."""
    return [preimage_in_branch(spec, y, br, policy) for br in branches(spec)]


def c1_constant(spec: MapSpec):
    """Distance from the poles beyond which orbits descend without crossing them."""
    return 2 * spec.spread + 1


def epsilon0(spec: MapSpec):
    """Neighbourhood radius below which the pole singularity dominates.

    For delta <= epsilon0 and every pole j,
    |f(b_j +- delta)| >= a_j / (2 delta). With delta <= min(1, gap/2) the
    non-singular part of f(b_j + delta) is bounded by
    B_j = 1 + max|b| + 2 sum_{i != j} a_i / gap, and the bound holds once
    delta <= a_j / (2 B_j).
    """
    max_abs_beta = max(abs(b) for b in spec.betas)
    candidates = [mpq(1)]
    if spec.pole_gap != INF:
        candidates.append(spec.pole_gap / 4)
    for j, a in enumerate(spec.alphas):
        others = spec.alpha_sum - a
        bound = 1 + max_abs_beta
        if spec.pole_gap != INF:
            bound += 2 * others / spec.pole_gap
        candidates.append(a / (2 * bound))
    return min(candidates)


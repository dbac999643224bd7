"""Orbits with shadow verification, first hits, halving times and itineraries."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InvariantViolation, PoleEvaluation, PrecisionExhausted
from .mapcore import MapSpec, c1_constant, coefficients, epsilon0, eval_map, make_step, pole_index
from .precision import PrecisionPolicy, bit_size, format_number, to_rational

log = logging.getLogger(__name__)

CHUNK = 64
MAX_ADAPTIVE_BITS = 4096


@dataclass(frozen=True)
class Orbit:
    """Iterates x_0 .. x_n.

    ``pole_hit`` is set when the orbit reached a pole exactly; ``values`` then
    ends with that pole and the orbit is shorter than requested.
    ``verified_through`` is the last index at which the shadow orbit agreed
    (-1 when verification was switched off).
    """

    x0: object
    values: tuple
    policy: PrecisionPolicy
    verified_through: int
    pole_hit: PoleEvaluation | None = None

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @property
    def verified(self) -> bool:
        return self.verified_through >= self.n

    def rows(self):
        return [(k, format_number(v)) for k, v in enumerate(self.values)]

    def summary(self) -> dict:
        return {
            "x0": format_number(self.values[0]),
            "n": self.n,
            "verified_through": self.verified_through,
            "pole_hit": None if self.pole_hit is None else {
                "step": self.pole_hit.step, "pole_index": self.pole_hit.pole_index},
            "last": format_number(self.values[-1]),
            "policy": self.policy.describe(),
        }


@dataclass(frozen=True)
class HitRecord:
    """First n in [1, n_max] with min_i |x_n - b_i| <= eps, or none.

    ``status`` is ``"hit"``, ``"miss"`` (no hit within ``n_max``) or
    ``"unverified"`` (shadow verification failed before resolution).
    """

    x0: object
    eps: object
    n_max: int
    n_hit: int | None = None
    pole_index: int | None = None
    distance: object = None
    status: str = "miss"
    verified_through: int = -1
    bits: int = 0

    def summary(self) -> dict:
        return {
            "x0": format_number(self.x0),
            "eps": format_number(self.eps),
            "n_max": self.n_max,
            "n_hit": self.n_hit,
            "pole_index": self.pole_index,
            "distance": None if self.distance is None else format_number(self.distance),
            "status": self.status,
            "verified_through": self.verified_through,
            "bits": self.bits,
        }


@dataclass
class _Run:
    values: list
    verified_through: int
    pole_hit: PoleEvaluation | None = None
    stopped_at: int | None = None
    diverged: bool = False
    shadow_values: list = field(default_factory=list)


def _nearest(betas, x):
    best_i, best_d = 0, abs(x - betas[0])
    for i in range(1, len(betas)):
        d = abs(x - betas[i])
        if d < best_d:
            best_i, best_d = i, d
    return best_i, best_d


def _run(spec, x0, n, policy, *, shadow=True, until=None, stop_on_divergence=False, keep_shadow=False):
    """Core iteration loop shared by every orbit operation.

    Base and shadow orbits are advanced in chunks so that each precision
    context is entered once per chunk. ``until(k, x)`` is tested on base
    iterates for k >= 1 and stops the run at the first true result.
    """
    if n < 0:
        raise InvariantViolation("n", "must be non-negative")
    _, betas = coefficients(spec, policy)
    step = make_step(spec, policy)
    with policy.context():
        x = policy.number(x0)
        i = pole_index(betas, x)
        if i is not None:
            raise PoleEvaluation(i, x, step=0)

    if policy.exact:
        return _run_exact(spec, x, n, policy, step, betas, until)

    values = [x]
    run = _Run(values, 0 if shadow else -1)
    spolicy = policy.shadow()
    if shadow:
        _, sbetas = coefficients(spec, spolicy)
        sstep = make_step(spec, spolicy)
        tol = policy.tolerance()
        with spolicy.context():
            xs = spolicy.number(x0)
        if abs(xs - x) > tol:
            run.verified_through = -1
            run.diverged = True
        if keep_shadow:
            run.shadow_values.append(xs)
    k = 0
    while k < n and run.stopped_at is None and run.pole_hit is None:
        start = k
        stop = min(n, k + CHUNK)
        with policy.context():
            while k < stop:
                i = pole_index(betas, x)
                if i is not None:
                    run.pole_hit = PoleEvaluation(i, x, step=k)
                    break
                x = step(x)
                k += 1
                values.append(x)
                if until is not None and until(k, x):
                    run.stopped_at = k
                    break
        if shadow and not run.diverged:
            with spolicy.context():
                for j in range(start + 1, k + 1):
                    if pole_index(sbetas, xs) is not None:
                        run.diverged = True
                        break
                    xs = sstep(xs)
                    if keep_shadow:
                        run.shadow_values.append(xs)
                    if abs(xs - values[j]) > tol:
                        run.diverged = True
                        break
                    run.verified_through = j
            if run.diverged and stop_on_divergence:
                break
    return run


def _run_exact(spec, x, n, policy, step, betas, until):
    values = [x]
    run = _Run(values, 0)
    for k in range(1, n + 1):
        i = pole_index(betas, x)
        if i is not None:
            run.pole_hit = PoleEvaluation(i, x, step=k - 1)
            break
        x = step(x)
        if bit_size(x) > policy.rational_bit_budget:
            raise PrecisionExhausted(
                f"rational iterate {k} needs {bit_size(x)} bits, budget {policy.rational_bit_budget}",
                partial=Orbit(values[0], tuple(values), policy, k - 1))
        values.append(x)
        run.verified_through = k
        if until is not None and until(k, x):
            run.stopped_at = k
            break
    return run


def iterate(spec: MapSpec, x0, n: int, policy: PrecisionPolicy | None = None, *, shadow: bool = True) -> Orbit:
    """Orbit x_0, ..., x_n of ``x0``.

    Raises PoleEvaluation when ``x0`` itself is a pole. An orbit that lands
    on a pole later is returned truncated with ``pole_hit`` set.
    """
    policy = policy or PrecisionPolicy.for_steps(n)
    run = _run(spec, x0, n, policy, shadow=shadow)
    return Orbit(run.values[0], tuple(run.values), policy, run.verified_through, run.pole_hit)


def shadow_verify(spec: MapSpec, x0, n: int, policy: PrecisionPolicy) -> int:
    """Largest k such that base and shadow orbits agree at every index <= k."""
    run = _run(spec, x0, n, policy, shadow=True, stop_on_divergence=True)
    return run.verified_through


def _hit_predicate(spec, policy, eps):
    _, betas = coefficients(spec, policy)
    if len(betas) == 1:
        b = betas[0]
        if b == 0:
            return lambda k, x: abs(x) <= eps
        return lambda k, x: abs(x - b) <= eps
    return lambda k, x: any(abs(x - b) <= eps for b in betas)


def first_hit(spec: MapSpec, x0, eps, n_max: int, policy: PrecisionPolicy | None = None) -> HitRecord:
    """Earliest n in [1, n_max] whose iterate lies within ``eps`` of a pole.

    Raises PrecisionExhausted (with the unverified record as ``partial``)
    when the shadow orbit diverges before the question is settled.
    """
    if n_max < 1:
        raise InvariantViolation("n_max", "must be >= 1")
    policy = policy or PrecisionPolicy.for_steps(n_max)
    with policy.context():
        eps_w = policy.number(eps)
    if not eps_w > 0:
        raise InvariantViolation("eps", "must be positive")
    run = _run(spec, x0, n_max, policy, shadow=not policy.exact,
               until=_hit_predicate(spec, policy, eps_w), stop_on_divergence=True)
    x0w = run.values[0]
    base = dict(x0=x0w, eps=eps_w, n_max=n_max, bits=policy.bits)
    if run.pole_hit is not None and run.stopped_at is None:
        # a pole iterate is at distance 0, so the hit predicate fired first
        raise AssertionError("pole reached without a hit")
    resolved = run.stopped_at if run.stopped_at is not None else len(run.values) - 1
    if policy.exact or run.verified_through >= resolved:
        if run.stopped_at is None:
            return HitRecord(**base, status="miss", verified_through=run.verified_through)
        with policy.context():
            _, betas = coefficients(spec, policy)
            j, d = _nearest(betas, run.values[run.stopped_at])
        return HitRecord(**base, n_hit=run.stopped_at, pole_index=j, distance=d, status="hit",
                         verified_through=run.verified_through)
    partial = HitRecord(**base, status="unverified", verified_through=run.verified_through)
    raise PrecisionExhausted(
        f"shadow orbit diverged after step {run.verified_through} at {policy.bits} bits", partial=partial)


def first_hit_adaptive(spec: MapSpec, x0, eps, n_max: int, policy: PrecisionPolicy,
                       max_bits: int = MAX_ADAPTIVE_BITS) -> HitRecord:
    """:func:`first_hit`, doubling the precision after each failed verification."""
    while True:
        try:
            return first_hit(spec, x0, eps, n_max, policy)
        except PrecisionExhausted:
            if policy.exact or policy.bits * 2 > max_bits:
                raise
            log.debug("retrying x0=%s at %d bits", x0, policy.bits * 2)
            policy = policy.with_bits(policy.bits * 2)


def halving_time(spec: MapSpec, x0, policy: PrecisionPolicy | None = None) -> int:
    """First j >= 1 at which the distance to the nearest pole falls below half its initial value."""
    policy = policy or PrecisionPolicy.bigfloat(256)
    with policy.context():
        _, betas = coefficients(spec, policy)
        x = policy.number(x0)
        _, d0 = _nearest(betas, x)
        if d0 < policy.number(c1_constant(spec)):
            raise InvariantViolation(
                "x0", f"distance {format_number(d0)} to the poles is below c1 = {format_number(c1_constant(spec))}")
        half = d0 / 2
        # x**2 loses about 2 * alpha_sum per step, so this cap is never reached
        cap = int(math.ceil(float(d0) ** 2)) + 4 * int(math.ceil(float(abs(x)) ** 2)) + 64

    def below_half(k, x):
        return _nearest(betas, x)[1] < half

    run = _run(spec, x0, cap, policy, shadow=not policy.exact, until=below_half, stop_on_divergence=True)
    if run.stopped_at is None:
        raise PrecisionExhausted(f"no halving within {cap} steps (verified through {run.verified_through})")
    if not policy.exact and run.verified_through < run.stopped_at:
        raise PrecisionExhausted(f"halving step {run.stopped_at} not verified at {policy.bits} bits")
    return run.stopped_at


def first_entry(spec: MapSpec, x0, lower, upper, n_max: int, policy: PrecisionPolicy | None = None) -> int | None:
    """First n in [1, n_max] with lower <= x_n <= upper, or None."""
    policy = policy or PrecisionPolicy.bigfloat(256)
    with policy.context():
        lo, hi = policy.number(lower), policy.number(upper)
    run = _run(spec, x0, n_max, policy, shadow=not policy.exact,
               until=lambda k, x: lo <= x <= hi, stop_on_divergence=True)
    resolved = run.stopped_at if run.stopped_at is not None else len(run.values) - 1
    if not policy.exact and run.verified_through < resolved:
        raise PrecisionExhausted(f"entry search not verified past step {run.verified_through}")
    return run.stopped_at


def _exact(value):
    # floats such as 1e-3 are read by their shortest decimal form
    return to_rational(repr(value) if isinstance(value, float) else value)


def escape_magnitude(spec: MapSpec, j: int, delta, policy: PrecisionPolicy | None = None, side: int = 1):
    """|f(b_j + side * delta)| for the pole with 0-based index ``j``."""
    if side not in (1, -1):
        raise InvariantViolation("side", "must be +1 or -1")
    if not 0 <= j < spec.m:
        raise InvariantViolation("j", f"pole index out of range for m={spec.m}")
    policy = policy or PrecisionPolicy.bigfloat(256)
    d = _exact(delta)
    if not d > 0:
        raise InvariantViolation("delta", "must be positive")
    if spec.pole_gap != float("inf") and not d < spec.pole_gap / 2:
        raise InvariantViolation("delta", "must be below half the pole gap")
    y = eval_map(spec, spec.betas[j] + side * d, policy)
    with policy.context():
        return abs(y)


def escape_bound_holds(spec: MapSpec, j: int, delta, policy: PrecisionPolicy | None = None) -> bool:
    """Both sides of pole ``j`` satisfy |f(b_j +- delta)| >= a_j / (2 delta)."""
    policy = policy or PrecisionPolicy.bigfloat(256)
    d = _exact(delta)
    with policy.context():
        bound = policy.number(spec.alphas[j] / (2 * d))
        return all(escape_magnitude(spec, j, d, policy, side) >= bound for side in (1, -1))


def _require_graham(spec):
    if not spec.is_graham:
        raise InvariantViolation("spec", "itineraries are defined for Graham's map x - 1/x only")


def itinerary(spec: MapSpec, x0, n: int, policy: PrecisionPolicy | None = None) -> list[int]:
    """Sign bits b_k = 0 if x_k > 0 else 1, for k = 0..n, from a verified orbit."""
    _require_graham(spec)
    policy = policy or PrecisionPolicy.for_steps(n)
    orbit = iterate(spec, x0, n, policy)
    if orbit.pole_hit is not None:
        raise orbit.pole_hit
    if not policy.exact and orbit.verified_through < n:
        raise PrecisionExhausted(
            f"orbit verified only through step {orbit.verified_through} of {n} at {policy.bits} bits",
            partial=orbit)
    return [0 if v > 0 else 1 for v in orbit.values]


def itinerary_adaptive(spec: MapSpec, x0, n: int, policy: PrecisionPolicy,
                       max_bits: int = MAX_ADAPTIVE_BITS) -> tuple[list[int], PrecisionPolicy]:
    """:func:`itinerary`, doubling the precision until the orbit verifies; returns the policy used."""
    while True:
        try:
            return itinerary(spec, x0, n, policy), policy
        except PrecisionExhausted:
            if policy.exact or policy.bits * 2 > max_bits:
                raise
            policy = policy.with_bits(policy.bits * 2)


def theta_from_bits(bits) -> Fraction:
    return sum((Fraction(b, 2 ** (k + 1)) for k, b in enumerate(bits)), Fraction(0))


def theta_estimate(spec: MapSpec, x0, n: int, policy: PrecisionPolicy | None = None) -> Fraction:
    """Binary read-out sum_k b_k 2**-(k+1) of the itinerary, in [0, 1)."""
    return theta_from_bits(itinerary(spec, x0, n, policy))


def quadratic_descent_ratio(spec: MapSpec, x0, policy: PrecisionPolicy | None = None) -> list[float]:
    """(x_n**2 + 2 alpha_sum n) / x_0**2 along the descent of ``x0`` toward the poles.

    Tracks the orbit until it first enters [b_m + 2, x0] from above stops
    holding, i.e. while x_n > b_m + 2.
    """
    policy = policy or PrecisionPolicy.bigfloat(256)
    with policy.context():
        x = policy.number(x0)
        floor = policy.number(spec.betas[-1] + 2)
        if not x > floor:
            raise InvariantViolation("x0", "must lie above the largest pole + 2")
        cap = 4 * int(math.ceil(float(x) ** 2)) + 64
    run = _run(spec, x0, cap, policy, shadow=False, until=lambda k, v: not v > floor)
    two_a = float(2 * spec.alpha_sum)
    x0f = float(x) ** 2
    end = run.stopped_at if run.stopped_at is not None else len(run.values)
    return [(float(v) ** 2 + two_a * k) / x0f for k, v in enumerate(run.values[:end])]


def halving_lower_bound(spec: MapSpec, x0) -> float:
    """x**2 / (4 alpha_sum): minimum number of steps before the pole distance halves."""
    return float(x0) ** 2 / (4 * float(spec.alpha_sum))


__all__ = [
    "Orbit", "HitRecord", "iterate", "shadow_verify", "first_hit", "first_hit_adaptive", "halving_time",
    "first_entry", "escape_magnitude", "escape_bound_holds", "itinerary", "itinerary_adaptive", "theta_estimate", "theta_from_bits",
    "quadratic_descent_ratio", "halving_lower_bound", "epsilon0", "c1_constant",
]

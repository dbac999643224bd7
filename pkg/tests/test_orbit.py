from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from poledyn import MapSpec, PoleEvaluation, PrecisionExhausted, PrecisionPolicy
from poledyn.errors import InvariantViolation
from poledyn.mapcore import epsilon0, eval_map
from poledyn.orbit import (escape_bound_holds, escape_magnitude, first_entry, first_hit, first_hit_adaptive,
                           halving_time, itinerary, iterate, halving_lower_bound, quadratic_descent_ratio,
                           shadow_verify, theta_estimate)


def test_iterate_exact_example(graham, exact):
    orbit = iterate(graham, 2, 3, exact)
    assert list(orbit.values) == [2, mpq(3, 2), mpq(5, 6), mpq(-11, 30)]
    assert orbit.verified
    assert [v for _, v in orbit.rows()] == ["2", "3/2", "5/6", "-11/30"]


def test_iterate_bigfloat_matches_step_by_step(two_pole, p256):
    orbit = iterate(two_pole, "7.25", 10, p256)
    assert orbit.n == 10 and orbit.verified
    for a, b in zip(orbit.values, orbit.values[1:]):
        assert b == eval_map(two_pole, a, p256)


def test_far_seed_moves_toward_poles(two_pole, p256):
    orbit = iterate(two_pole, 1000, 1, p256)
    assert orbit.values[1] < orbit.values[0]


def test_pole_reached_truncates_orbit(graham, exact):
    orbit = iterate(graham, 1, 2, exact)
    assert list(orbit.values) == [1, 0]
    assert orbit.pole_hit is not None and orbit.pole_hit.step == 1
    with pytest.raises(PoleEvaluation):
        iterate(graham, 0, 2, exact)


def test_shadow_verify_examples(graham):
    assert shadow_verify(graham, 2, 20, PrecisionPolicy.bigfloat(256, shadow_margin_bits=128)) == 20
    assert shadow_verify(graham, 2, 300, PrecisionPolicy.bigfloat(128)) < 300
    assert shadow_verify(graham, 2, 0, PrecisionPolicy.bigfloat(128)) == 0


def test_shadow_off_reports_unverified(graham, p256):
    orbit = iterate(graham, 2, 5, p256, shadow=False)
    assert orbit.verified_through == -1 and not orbit.verified


def test_first_hit_examples(graham, exact, p256):
    rec = first_hit(graham, 2, "0.5", 10, exact)
    assert (rec.status, rec.n_hit, rec.pole_index, rec.distance) == ("hit", 3, 0, mpq(11, 30))
    rec = first_hit(graham, 2, "0.01", 1, exact)
    assert rec.status == "miss" and rec.n_hit is None
    rec = first_hit(graham, 10, 1, 200, p256)
    assert 40 <= rec.n_hit <= 60


def test_first_hit_ignores_step_zero(graham, exact):
    # x0 itself is within eps of the pole, but only n >= 1 counts
    # x1 = -3/2 is outside
    rec = first_hit(graham, "0.5", 1, 1, exact)
    assert rec.status == "miss" and rec.n_hit is None


def test_first_hit_record_is_earliest(two_pole, p256):
    rec = first_hit(two_pole, 15, "0.3", 500, p256)
    assert rec.status == "hit"
    orbit = iterate(two_pole, 15, rec.n_hit, p256)
    dists = [min(abs(mpq(v) - b) for b in two_pole.betas) for v in orbit.values]
    assert dists[-1] <= mpq("0.3")
    assert all(d > mpq("0.3") for d in dists[1:-1])


def test_first_hit_raises_with_partial_when_unverified(graham):
    policy = PrecisionPolicy.bigfloat(64)
    with pytest.raises(PrecisionExhausted) as info:
        first_hit(graham, "2.5", "1e-12", 400, policy)
    assert info.value.partial.status == "unverified"
    rec = first_hit_adaptive(graham, "2.5", "1e-12", 400, policy, max_bits=4096)
    assert rec.bits > 64 and rec.status in ("hit", "miss")


def test_halving_time_examples(graham, p256):
    j = halving_time(graham, 10, p256)
    assert j >= 25
    assert abs(j - 37) <= 2
    assert halving_time(graham, -10, p256) == j
    with pytest.raises(InvariantViolation):
        halving_time(MapSpec((1, 1), (-1, 1)), 2, p256)


def test_first_entry_boundary(graham, p256):
    assert first_entry(graham, "2.1", -1, 1, 20, p256) <= 5


def test_escape_magnitude_examples(graham, two_pole, p256):
    assert abs(mpq(escape_magnitude(graham, 0, "0.01", p256)) - mpq("99.99")) < mpq(1, 10**60)
    assert abs(mpq(escape_magnitude(graham, 0, "0.001", p256)) - mpq("999.999")) < mpq(1, 10**60)
    v = escape_magnitude(two_pole, 1, "0.01", p256)
    assert abs(float(v) - 99.4875) < 1e-3
    assert escape_bound_holds(two_pole, 1, "0.01", p256)
    with pytest.raises(InvariantViolation):
        escape_magnitude(two_pole, 2, "0.01", p256)


def test_itinerary_examples(graham, exact):
    assert itinerary(graham, 2, 3, exact) == [0, 0, 0, 1]
    assert itinerary(graham, -2, 3, exact) == [1, 1, 1, 0]
    assert itinerary(graham, 2, 0, exact) == [0]
    with pytest.raises(InvariantViolation):
        itinerary(MapSpec((1,), (1,)), 2, 3, exact)
    with pytest.raises(PoleEvaluation):
        itinerary(graham, 1, 3, exact)


def test_theta_examples(graham, exact, p256):
    assert theta_estimate(graham, 2, 3, exact) == Fraction(1, 16)
    n = 20
    t0 = theta_estimate(graham, 2, n, p256)
    t1 = theta_estimate(graham, eval_map(graham, 2, p256), n, p256)
    assert abs(t1 - (2 * t0) % 1) <= Fraction(1, 2**n)
    tm = theta_estimate(graham, -2, n, p256)
    assert abs(tm - (1 - t0)) <= Fraction(1, 2**(n + 1))


def test_itinerary_requires_verified_orbit(graham):
    with pytest.raises(PrecisionExhausted):
        itinerary(graham, 2, 400, PrecisionPolicy.bigfloat(128))


def test_halving_lower_bound_value(graham, two_pole):
    assert halving_lower_bound(graham, 10) == 25
    assert halving_lower_bound(two_pole, 10) == 12.5


def test_quadratic_descent_stays_within_quarter(two_pole, p256):
    ratios = quadratic_descent_ratio(two_pole, 40, p256)
    assert len(ratios) > 100
    assert all(abs(r - 1) <= 0.25 for r in ratios)


seeds = st.fractions(min_value=Fraction(-5), max_value=Fraction(5), max_denominator=1000).filter(lambda q: q != 0)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_shift_commutation(x):
    g = MapSpec.graham()
    policy = PrecisionPolicy.bigfloat(256)
    try:
        bits = itinerary(g, str(x), 30, policy)
        bits1 = itinerary(g, eval_map(g, str(x), policy), 29, policy)
    except PoleEvaluation:
        return
    assert bits1 == bits[1:]


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_odd_symmetry_exact(x):
    g = MapSpec.graham()
    policy = PrecisionPolicy.rational()
    try:
        a = iterate(g, x, 6, policy)
        b = iterate(g, -x, 6, policy)
    except PrecisionExhausted:
        return
    assert list(b.values) == [-v for v in a.values]


@settings(max_examples=20, deadline=None)
@given(st.lists(st.fractions(min_value=Fraction(1, 10), max_value=5, max_denominator=100), min_size=1, max_size=3),
       st.integers(min_value=0, max_value=2))
def test_escape_bound_property(alphas, j_seed):
    betas = [Fraction(3 * i) for i in range(len(alphas))]
    spec = MapSpec(alphas, betas)
    j = j_seed % spec.m
    e0 = epsilon0(spec)
    for delta in ("1e-2", "1e-3", "1e-4"):
        if mpq(delta) < e0:
            assert escape_bound_holds(spec, j, delta)


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=25, max_value=60))
def test_quadratic_descent_property(x0):
    ratios = quadratic_descent_ratio(MapSpec.graham(), x0)
    assert all(abs(r - 1) <= 0.25 for r in ratios)

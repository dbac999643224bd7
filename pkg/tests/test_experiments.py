import math

import numpy as np
import pytest
from gmpy2 import mpq

from poledyn import EpsilonTooLarge, MapSpec, PrecisionPolicy
from poledyn.errors import InvariantViolation
from poledyn.experiments import (ExperimentConfig, _membership, density_estimate, disjointness_sweep,
                                 hitting_scaling_study, logsq_budget, logsq_conjecture_probe, quadratic_budget,
                                 sample_points, wilson_interval)
from poledyn.intervals import pullback
from poledyn.orbit import first_hit


def small_config(**kw):
    args = dict(spec=MapSpec.graham(), seed=42, samples=60, values=(5, 10), c1=2)
    args.update(kw)
    return ExperimentConfig(**args)


def test_config_validation():
    with pytest.raises(InvariantViolation):
        small_config(samples=0)
    with pytest.raises(InvariantViolation):
        small_config(c1=0)
    with pytest.raises(InvariantViolation):
        small_config(seed=-1)


def test_sampling_is_seeded_and_cell_keyed():
    a = sample_points(42, 0, 20.0, 100)
    assert np.array_equal(a, sample_points(42, 0, 20.0, 100))
    assert not np.array_equal(a, sample_points(42, 1, 20.0, 100))
    assert not np.array_equal(a, sample_points(43, 0, 20.0, 100))
    assert np.all(np.abs(a) <= 20)
    # a longer draw extends the shorter one
    assert np.array_equal(a, sample_points(42, 0, 20.0, 150)[:100])


def test_wilson_interval_matches_closed_form():
    lo, hi = wilson_interval(90, 100)
    z, n, p = 1.959963984540054, 100, 0.9
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert (lo, hi) == pytest.approx((centre - half, centre + half), abs=1e-12)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_budgets():
    assert logsq_budget(math.e) == 2
    assert logsq_budget(0.0) == 0
    assert quadratic_budget(mpq(2))(3.0) == 18
    assert quadratic_budget(mpq(2))(-0.5) == 0


def test_density_is_deterministic():
    a = density_estimate(small_config())
    b = density_estimate(small_config())
    assert a.payload_json() == b.payload_json()
    for cell in a.cells:
        assert 0 <= cell["fraction"] <= 1
        lo, hi = cell["wilson95"]
        assert lo <= cell["fraction"] <= hi
        qs = [q for q in cell["hit_time_quantiles"].values() if q is not None]
        assert qs == sorted(qs)


def test_density_thread_count_does_not_change_payload():
    a = density_estimate(small_config(samples=30, values=(8,)))
    b = density_estimate(small_config(samples=30, values=(8,), threads=2))
    assert a.payload_json() == b.payload_json()


def test_tiny_c1_gives_empty_set():
    r = density_estimate(small_config(c1="1e-9", values=(20,)))
    assert r.cells[0]["fraction"] == 0


def test_small_seeds_hit_on_first_step(graham):
    # for 1/sqrt(2) < |x| < 1 the budget is one step and |f(x)| < 1 < 1/|x|
    policy = PrecisionPolicy.bigfloat(256)
    budget = quadratic_budget(mpq(2))
    for x in np.linspace(0.72, 0.99, 20):
        for s in (x, -x):
            assert _membership(graham, float(s), budget, policy, 4096)[:2] == ("hit", 1)
    # below 1/sqrt(2) the budget is empty
    assert _membership(graham, 0.5, budget, policy, 4096)[0] == "miss"


def test_logsq_probe_reports_fractions():
    r = logsq_conjecture_probe(small_config(values=(10, 20), samples=40))
    assert r.summary["budget"].startswith("floor(|x|")
    assert all(0 <= c["fraction"] <= 1 for c in r.cells)


def test_scaling_graham():
    r = hitting_scaling_study(small_config(values=(10, 20, 40, 80)))
    assert 1.9 <= r.summary["exponent"] <= 2.1
    for c in r.cells:
        x0 = float(c["x0"])
        assert c["steps"] == pytest.approx((x0 * x0 - 1) / 2, rel=0.1)


def test_scaling_heavier_pole():
    r = hitting_scaling_study(small_config(spec=MapSpec((2,), (0,)), values=(20,)))
    assert abs(r.cells[0]["steps"] - 100) <= 10
    assert r.cells[0]["descent_rate"] == pytest.approx(4, rel=0.1)


def test_scaling_rejects_seeds_near_poles():
    with pytest.raises(InvariantViolation):
        hitting_scaling_study(small_config(values=("0.5",)))


def test_scaling_near_boundary_is_fast():
    r = hitting_scaling_study(small_config(values=("1.5",)))
    assert r.cells[0]["steps"] <= 5


def test_disjointness_sweep():
    r = disjointness_sweep(MapSpec.graham(), ["0.05", "0.02"], 8)
    w = {c["eps"]: c["window"] for c in r.cells}
    assert w["1/20"] >= 4
    assert w["1/50"] >= w["1/20"]
    assert r.summary["window_monotone"] and r.summary["precision_sufficient"]
    with pytest.raises(EpsilonTooLarge):
        disjointness_sweep(MapSpec.graham(), ["0.5"], 4)


def test_budget_k_predicate_matches_pullback_union(graham):
    policy = PrecisionPolicy.bigfloat(256)
    eps, k = "0.1", 6
    levels = pullback(graham, eps, k, policy)
    xs = sample_points(42, 0, 3.0, 500)
    checked = 0
    for x in xs:
        if min(s.boundary_distance(x) for s in levels[1:]) < mpq(1, 2**180):
            continue
        hit = first_hit(graham, float(x), eps, k, policy).status == "hit"
        assert hit == any(s.contains(x) for s in levels[1:])
        checked += 1
    assert checked >= 495

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from conftest import dense_hitting_times
from driftkit.montecarlo import run_trials, wilson_interval
from driftkit.oracle import exact_expectation, exact_tail, expected_hitting_times
from driftkit.potential import HSpec, build_potential, exp_potential_second_differences, integrate_reciprocal
from driftkit.processes import ProcessSpec, onemax_drift_bounds
from driftkit.sweep import random_chain
from driftkit.tails import SimplifiedTailParams
from driftkit.theorems import (FitnessPartition, additive_upper, fitness_levels_upper, multiplicative_upper,
                               variable_upper)

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])

positive = st.floats(0.05, 20.0, allow_nan=False)


@st.composite
def h_specs(draw):
    """Positive h of every kind on a finite domain."""
    x_min = draw(st.floats(0.5, 3.0))
    x_max = x_min + draw(st.floats(1.0, 40.0))
    kind = draw(st.sampled_from(["constant", "multiplicative", "expression", "table"]))
    if kind == "constant":
        return HSpec.constant(draw(positive), x_min, x_max)
    if kind == "multiplicative":
        return HSpec.multiplicative(draw(positive), x_min, x_max)
    if kind == "expression":
        a, b = draw(positive), draw(positive)
        power = draw(st.sampled_from([0.5, 1.0, 2.0]))
        return HSpec.expression(f"{a!r} + {b!r}*x^{power!r}", x_min, x_max)
    x_min = float(draw(st.integers(1, 3)))
    top = int(x_min) + draw(st.integers(1, 30))
    values = draw(st.lists(positive, min_size=top - int(x_min) + 1, max_size=top - int(x_min) + 1))
    return HSpec.from_table({k: v for k, v in zip(range(int(x_min), top + 1), values)})


def _point(draw, h):
    return draw(st.floats(h.x_min, h.x_max))


# potential

@SETTINGS
@given(st.data())
def test_potential_is_monotone(data):
    h = data.draw(h_specs())
    g = build_potential(h)
    x, y = sorted((_point(data.draw, h), _point(data.draw, h)))
    assert g(x) <= g(y) * (1 + 1e-12)
    assert 0.0 == g(0) <= g(x)


@SETTINGS
@given(st.data())
def test_potential_differences_are_integrals(data):
    h = data.draw(h_specs())
    g = build_potential(h)
    x, y = sorted((_point(data.draw, h), _point(data.draw, h)))
    assert g(y) - g(x) == pytest.approx(integrate_reciprocal(h, x, y), rel=1e-8, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0.05, 1.0), margin=st.floats(0.0, 2.0), offset=st.floats(0.5, 5.0))
def test_exp_potential_concavity_cases(lam, margin, offset):
    # h = s x + offset, so h' = s everywhere
    def second(slope, sign):
        h = HSpec.expression(f"{slope!r}*x + {offset!r}", 1.0, 30.0)
        return exp_potential_second_differences(build_potential(h), lam, sign)

    steep = lam * (1 + margin) + 1e-3
    assert np.max(second(steep, 1)) <= 1e-6          # h' >= lam: exp(lam g) concave
    flat = lam / (1 + margin) - 1e-3
    if flat > 0:
        assert np.min(second(flat, 1)) >= -1e-6      # h' <= lam: exp(lam g) convex
    assert np.min(second(steep, -1)) >= -1e-6        # h' >= -lam: exp(-lam g) convex
    down = HSpec.expression(f"{offset + 40 * lam * (1 + margin)!r} - {lam * (1 + margin)!r}*x", 1.0, 30.0)
    assert np.max(exp_potential_second_differences(build_potential(down), lam, -1)) <= 1e-6


# tails

@SETTINGS
@given(d_excess=st.floats(0.01, 5.0), lam=st.floats(0.01, 2.0),
       deltas=st.lists(st.floats(1e-4, 10.0), min_size=2, max_size=2))
def test_eta_is_monotone_and_capped(d_excess, lam, deltas):
    mgf = 1 + lam + d_excess
    lo, hi = sorted(deltas)
    eta_lo = SimplifiedTailParams(mgf, lam, lo).eta
    eta_hi = SimplifiedTailParams(mgf, lam, hi).eta
    assert eta_lo <= eta_hi <= lam


# theorem specialisations

@settings(max_examples=30, deadline=None)
@given(delta=st.floats(1e-3, 0.999), x_min=st.floats(0.1, 5.0), stretch=st.floats(1.0, 1e3))
def test_variable_drift_reduces_to_multiplicative(delta, x_min, stretch):
    x0 = x_min * stretch
    expected = multiplicative_upper(delta, x_min, x0).bound
    closed = variable_upper(HSpec.multiplicative(delta, x_min, x0), x0).bound
    quad = variable_upper(HSpec.expression(f"{delta!r}*x", x_min, x0), x0).bound
    assert closed == pytest.approx(expected, rel=1e-8)
    assert quad == pytest.approx(expected, rel=1e-8)


@SETTINGS
@given(delta=st.floats(1e-3, 5.0), x_min=st.floats(0.1, 5.0), extra=st.floats(0.0, 500.0))
def test_variable_drift_reduces_to_additive(delta, x_min, extra):
    x0 = x_min + extra
    expected = additive_upper(delta, x0).bound
    assert variable_upper(HSpec.constant(delta, x_min), x0).bound == pytest.approx(expected, rel=1e-8)
    quad = variable_upper(HSpec.expression(f"{delta!r} + 0*x", x_min, max(x0, x_min + 1)), x0).bound
    assert quad == pytest.approx(expected, rel=1e-8)


@SETTINGS
@given(st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=40))
def test_fitness_levels_is_variable_drift_over_levels(probs):
    # p_i non-increasing in the level keeps h(x) = p_{m - ceil x} non-decreasing
    p = sorted(probs, reverse=True)
    m = len(p) + 1
    levels = fitness_levels_upper(FitnessPartition(m, p=p)).bound
    h = HSpec.from_table({x: p[m - x - 1] for x in range(1, m)})
    assert variable_upper(h, m - 1).bound == levels


# oracle

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), kind=st.sampled_from(["monotone", "biased", "walk"]))
def test_random_chains_are_valid(seed, kind):
    chain = random_chain(np.random.default_rng(seed), 30, kind)
    sums = np.asarray(chain.matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(sums - 1)) <= 1e-12
    times = expected_hitting_times(chain)
    assert np.all(np.isfinite(times))
    assert np.allclose(times, dense_hitting_times(chain), rtol=1e-9)
    start = chain.size - 1
    e = exact_expectation(chain, start)
    horizon = int(min(200_000, 60 * e + 200))
    curve = exact_tail(chain, start, horizon)
    assume(curve.values[-1] < 1e-13)
    assert curve.mean() == pytest.approx(e, abs=1e-6 * max(1.0, e))


@SETTINGS
@given(n=st.integers(1, 5000), frac=st.floats(0.0, 1.0))
def test_onemax_drift_bounds_ordered(n, frac):
    x = max(1, min(n, int(round(frac * n))))
    lower, upper = onemax_drift_bounds(n, x)
    assert 0 < lower <= upper <= 1.0 + 1e-12


# montecarlo

@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2 ** 63), workers=st.integers(2, 8))
def test_simulation_independent_of_workers(seed, workers):
    spec = ProcessSpec.onemax(25)
    one = run_trials(spec, trials=5000, master_seed=seed, workers=1)
    many = run_trials(spec, trials=5000, master_seed=seed, workers=workers)
    assert np.array_equal(one.times, many.times)
    assert one.summary() == many.summary()


@SETTINGS
@given(trials=st.integers(1, 10 ** 6), frac=st.floats(0.0, 1.0), conf=st.floats(0.5, 0.9999))
def test_wilson_interval_contains_estimate(trials, frac, conf):
    count = int(round(frac * trials))
    low, high = wilson_interval(count, trials, conf)
    assert 0.0 <= low <= count / trials + 1e-12
    assert count / trials - 1e-12 <= high <= 1.0
    assert math.isfinite(low) and math.isfinite(high)

import math

import numpy as np
import pytest

from conftest import biased_walk, deterministic_chain
from driftkit.errors import DomainError, PreconditionError
from driftkit.oracle import (MarkovChain, build_leadingones_chain, build_onemax_chain, exact_drift_profile,
                             exact_expectation, level_lumped_chain, uniform_start)
from driftkit.potential import HSpec, build_potential
from driftkit.processes import onemax_drift_bounds
from driftkit.theorems import (ASSERTED, VERIFIED, FitnessPartition, additive_lower, additive_upper, fit_additive,
                               fit_alpha, fit_multiplicative, fit_multiplicative_lower_beta, fitness_levels_lower,
                               fitness_levels_upper, general_expected_bound, minimal_nonmonotone_c,
                               multiplicative_lower, multiplicative_upper, nonmonotone_variable_upper,
                               partition_from_chain, variable_lower, variable_upper)


# additive

@pytest.mark.parametrize("delta, x0, expected", [(1.0, 10.0, 10.0), (0.5, 10.0, 20.0)])
def test_additive_upper_values(delta, x0, expected):
    res = additive_upper(delta, x0)
    assert res.bound == expected
    assert res.direction == "upper"
    assert res.precondition_status == ASSERTED


@pytest.mark.parametrize("delta, x0, expected", [(1.0, 10.0, 10.0), (2.0, 10.0, 5.0)])
def test_additive_lower_values(delta, x0, expected):
    assert additive_lower(delta, x0).bound == expected


def test_additive_biased_walk_verified():
    chain = biased_walk()
    res = additive_upper(0.2, 10.0, chain)
    assert res.bound == pytest.approx(50.0)
    assert res.precondition_status == VERIFIED
    assert exact_expectation(chain, 10) <= res.bound * (1 + 1e-12)
    assert fit_additive(chain) == pytest.approx((0.2, 0.2))


def test_additive_violation_names_state():
    with pytest.raises(PreconditionError) as info:
        additive_upper(0.3, 10.0, biased_walk())
    assert info.value.witness["label"] >= 1


def test_additive_rejects_nonpositive_delta():
    with pytest.raises(DomainError):
        additive_upper(0.0, 3.0)


# general expected bound

def test_general_bound_trivial_cases():
    g = build_potential(HSpec.multiplicative(0.1, x_min=1.0))
    assert general_expected_bound(g, 1.0, 1.0).bound == pytest.approx(10.0)
    g_const = build_potential(HSpec.constant(1.0))
    assert general_expected_bound(g_const, 2.0, 30.0).bound == pytest.approx(15.0)


def test_general_bound_onemax_table_h():
    n = 20
    chain = build_onemax_chain(n)
    drift = exact_drift_profile(chain).drift
    h = HSpec.from_table({i: float(drift[i]) for i in range(1, n + 1)})
    g = build_potential(h)
    alpha = fit_alpha(chain, g, "upper")
    res = general_expected_bound(g, alpha, n, "upper", chain)
    assert res.precondition_status == VERIFIED
    assert res.bound >= exact_expectation(chain, n)
    alpha_low = fit_alpha(chain, g, "lower")
    low = general_expected_bound(g, alpha_low, n, "lower", chain)
    assert low.bound <= exact_expectation(chain, n) * (1 + 1e-12)


# variable drift

def _onemax_lower_h(n: int) -> HSpec:
    return HSpec.expression(f"exp(-1+x/{n})*x/{n}*(1-1/{n})", 1.0, float(n))


def test_variable_upper_onemax_expression():
    n = 100
    res = variable_upper(_onemax_lower_h(n), 50.0)
    chain = build_onemax_chain(n)
    assert res.bound >= exact_expectation(chain, 50)
    # fine trapezoid oracle for x_min/h(x_min) + int 1/h
    xs = np.linspace(1.0, 50.0, 200001)
    vals = 1.0 / (np.exp(-1 + xs / n) * xs / n * (1 - 1 / n))
    trap = float(np.sum((vals[1:] + vals[:-1]) * np.diff(xs)) / 2)
    assert res.bound == pytest.approx(vals[0] + trap, rel=1e-7)


def test_variable_upper_rejects_decreasing_h():
    with pytest.raises(PreconditionError) as info:
        variable_upper(HSpec.expression("1/x", 1.0, 10.0), 5.0)
    assert info.value.witness is not None


def test_variable_upper_verified_on_onemax():
    n = 30
    chain = build_onemax_chain(n)
    low = [onemax_drift_bounds(n, x)[0] for x in range(1, n + 1)]
    running = np.minimum.accumulate(np.array(low)[::-1])[::-1]
    h = HSpec.from_table({x: float(running[x - 1]) for x in range(1, n + 1)})
    res = variable_upper(h, n, chain)
    assert res.precondition_status == VERIFIED
    assert res.bound >= exact_expectation(chain, n)


def test_variable_lower_deterministic_walk():
    chain = deterministic_chain(10)
    res = variable_lower(HSpec.constant(1.0, x_min=1.0), lambda x: x - 1, 10.0, chain)
    assert res.bound == pytest.approx(10.0)
    assert res.precondition_status == VERIFIED


def test_variable_lower_rejects_long_jumps_on_onemax():
    n = 100
    chain = build_onemax_chain(n)
    h = HSpec.expression(f"x/{n}", 1.0, float(n))
    with pytest.raises(PreconditionError) as info:
        variable_lower(h, lambda x: max(0.0, x - math.log2(x) - 1), 50.0, chain)
    assert "state" in info.value.witness


# non-monotone variable drift

def test_nonmonotone_trivial():
    res = nonmonotone_variable_upper(HSpec.constant(1.0, x_min=1.0), 2.0, 10.0)
    assert res.bound == pytest.approx(40.0)


def _sawtooth_chain(size: int = 30, up: float = 0.01) -> MarkovChain:
    rows = [{}]
    for x in range(1, size + 1):
        down = 0.6 if x % 2 == 0 else 0.3
        row = {x - 1: down}
        if x < size:
            row[x + 1] = up
        row[x] = 1.0 - sum(row.values())
        rows.append(row)
    return MarkovChain.from_rows(list(range(size + 1)), rows)


def test_nonmonotone_sawtooth_minimal_c():
    chain = _sawtooth_chain()
    drift = exact_drift_profile(chain).drift
    h = HSpec.from_table({x: float(drift[x]) for x in range(1, 31)})
    assert h.monotone_witness() is not None
    c = minimal_nonmonotone_c(h, chain)
    # neighbouring drifts 0.59 and 0.29 give the ratio condition's c
    assert c == pytest.approx(0.59 / 0.29, rel=1e-9)
    res = nonmonotone_variable_upper(h, c, 30.0, chain)
    assert res.precondition_status == VERIFIED
    assert res.bound >= exact_expectation(chain, 30)
    with pytest.raises(PreconditionError):
        nonmonotone_variable_upper(h, 1.5, 30.0, chain)


# multiplicative

def test_multiplicative_upper_values():
    assert multiplicative_upper(0.1, 1.0, 1.0).bound == pytest.approx(10.0)
    assert multiplicative_upper(0.1, 1.0, math.e).bound == pytest.approx(20.0)


def test_multiplicative_upper_onemax():
    n = 100
    chain = build_onemax_chain(n)
    res = multiplicative_upper(1 / (math.e * n), 1.0, n, chain)
    assert res.bound == pytest.approx(math.e * n * (math.log(n) + 1), rel=1e-12)
    assert res.bound == pytest.approx(1523.6, abs=0.05)
    assert res.bound >= exact_expectation(chain, n)
    assert fit_multiplicative(chain) >= 1 / (math.e * n)


def test_multiplicative_lower_values():
    assert multiplicative_lower(0.5, 0.5, 1.0, math.e).bound == pytest.approx(4 / 3)
    near = multiplicative_lower(0.1, 0.001, 1.0, 5.0).bound
    assert near == pytest.approx((1 + math.log(5.0)) / 0.1, rel=3e-3)


def test_multiplicative_lower_fitted_onemax():
    n = 100
    chain = build_onemax_chain(n)
    delta = fit_multiplicative(chain, "lower")
    beta = fit_multiplicative_lower_beta(chain, delta, 1.0)
    res = multiplicative_lower(delta, beta, 1.0, n, chain)
    assert res.precondition_status == VERIFIED
    assert 0 < res.bound <= exact_expectation(chain, n)


# fitness levels

def test_fitness_levels_upper_values():
    assert fitness_levels_upper(FitnessPartition(3, p=(0.5, 0.25))).bound == 6.0
    assert fitness_levels_upper(FitnessPartition(2, p=(1.0,))).bound == 1.0


def test_fitness_levels_upper_onemax():
    n = 10
    p = [(n - i) * (1 / n) * (1 - 1 / n) ** (n - 1) for i in range(n)]
    res = fitness_levels_upper(FitnessPartition(n + 1, p=p, first_level=0), start_level=0)
    assert res.bound >= exact_expectation(build_onemax_chain(n), n)


def test_fitness_levels_lower_values():
    gamma = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    part = FitnessPartition(3, u=(0.5, 0.25), gamma=gamma, chi=1.0, start=(1.0, 0.0))
    assert fitness_levels_lower(part).bound == pytest.approx(6.0)
    part0 = FitnessPartition(3, u=(0.5, 0.25), gamma=gamma, chi=0.0, start=(1.0, 0.0))
    assert fitness_levels_lower(part0).bound == pytest.approx(2.0)


def test_fitness_levels_lower_gamma_violation_names_pair():
    gamma = np.array([[0.0, 0.5, 0.5], [0.0, 0.0, 1.0]])
    part = FitnessPartition(3, u=(0.5, 0.25), gamma=gamma, chi=1.0, start=(1.0, 0.0))
    with pytest.raises(PreconditionError) as info:
        fitness_levels_lower(part)
    assert info.value.witness == {"i": 1, "j": 2}


def test_fitness_levels_lower_leadingones():
    n = 8
    full = build_leadingones_chain(n)
    exact = exact_expectation(full, uniform_start(full))
    lumped = level_lumped_chain(full)
    # lumped states are ordered by label, so the start is the label histogram
    counts = np.bincount(full.labels.astype(int), minlength=n + 1)
    start = counts / counts.sum()
    part = partition_from_chain(lumped, start)
    res = fitness_levels_lower(part)
    assert res.bound <= exact * (1 + 1e-12)
    assert res.bound > 0.5 * exact

import itertools
import math

import numpy as np
import pytest
from scipy.stats import binom

from conftest import biased_walk, deterministic_chain, dense_hitting_times, dense_survival, geometric_chain
from driftkit.errors import DomainError, StateSpaceError
from driftkit.oracle import (MarkovChain, build_leadingones_chain, build_onemax_chain, dump_chain,
                             exact_drift_profile, exact_expectation, exact_tail, expected_hitting_times,
                             onemax_binomial_start, parse_chain, uniform_start)
from driftkit.potential import HSpec, build_potential


def _brute_onemax_row(n: int, zeros: int) -> np.ndarray:
    """Enumerate every mutation mask of a string with ``zeros`` leading zeros."""
    bits = np.array([0] * zeros + [1] * (n - zeros))
    row = np.zeros(n + 1)
    for mask in itertools.product((0, 1), repeat=n):
        mask = np.array(mask)
        k = mask.sum()
        prob = (1 / n) ** k * (1 - 1 / n) ** (n - k)
        child = bits ^ mask
        child_zeros = n - child.sum()
        row[child_zeros if child_zeros <= zeros else zeros] += prob
    return row


def _leading_ones(bits) -> int:
    count = 0
    for b in bits:
        if not b:
            break
        count += 1
    return count


def test_onemax_matrix_matches_mask_enumeration():
    n = 6
    mat = build_onemax_chain(n).matrix.toarray()
    for zeros in range(1, n + 1):
        assert np.allclose(mat[zeros], _brute_onemax_row(n, zeros), atol=1e-15)


def test_onemax_small_cases():
    assert build_onemax_chain(1).matrix.toarray()[1, 0] == 1.0
    mat = build_onemax_chain(2).matrix.toarray()
    assert mat[2].tolist() == pytest.approx([0.25, 0.5, 0.25])


def test_onemax_rows_stochastic_large_n():
    chain = build_onemax_chain(1000)
    sums = np.asarray(chain.matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(sums - 1)) <= 1e-12
    assert chain.is_monotone


def test_onemax_two_bits_expectation_by_hand():
    # from 2 zeros: E2 = 1 + E2/4 + E1/2 with E1 = 4, so E2 = 4
    assert exact_expectation(build_onemax_chain(2), 2) == pytest.approx(4.0, rel=1e-14)


def test_leadingones_matrix_matches_enumeration():
    n = 4
    chain = build_leadingones_chain(n)
    mat = chain.matrix.toarray()
    # state index s holds position j in bit j
    states = [tuple((s >> j) & 1 for j in range(n)) for s in range(2 ** n)]
    for s, parent in enumerate(states):
        if chain.target[s]:
            continue
        row = np.zeros(2 ** n)
        for mask in itertools.product((0, 1), repeat=n):
            k = sum(mask)
            prob = (1 / n) ** k * (1 - 1 / n) ** (n - k)
            child = tuple(p ^ m for p, m in zip(parent, mask))
            accept = _leading_ones(child) >= _leading_ones(parent)
            row[states.index(child) if accept else s] += prob
        assert np.allclose(mat[s], row, atol=1e-15), parent


def test_leadingones_single_bit():
    chain = build_leadingones_chain(1)
    assert exact_expectation(chain, chain.state_index(1)) == 1.0


def test_state_space_guards():
    with pytest.raises(StateSpaceError):
        build_leadingones_chain(13)
    with pytest.raises(StateSpaceError):
        build_onemax_chain(5001)


def test_geometric_and_deterministic_expectations():
    assert exact_expectation(geometric_chain(0.25), 1) == pytest.approx(4.0, rel=1e-14)
    assert exact_expectation(deterministic_chain(10), 10) == pytest.approx(10.0, rel=1e-14)


def test_back_substitution_agrees_with_dense_solve():
    chain = build_onemax_chain(60)
    assert chain.is_monotone
    assert np.allclose(expected_hitting_times(chain), dense_hitting_times(chain), rtol=1e-9, atol=0)


def test_nonmonotone_solve_agrees_with_dense_solve():
    chain = biased_walk()
    assert not chain.is_monotone
    assert np.allclose(expected_hitting_times(chain), dense_hitting_times(chain), rtol=1e-9)
    assert exact_expectation(chain, 10) == pytest.approx(50.0, rel=1e-9)


def test_unreachable_target_rejected():
    with pytest.raises(StateSpaceError):
        MarkovChain.from_rows([0, 1, 2], [{}, {0: 1.0}, {2: 1.0}])


def test_bad_rows_rejected():
    with pytest.raises(StateSpaceError):
        MarkovChain.from_rows([0, 1], [{}, {0: 0.5}])


def test_start_validation():
    chain = geometric_chain(0.5)
    with pytest.raises(DomainError):
        exact_expectation(chain, 5)
    with pytest.raises(DomainError):
        exact_expectation(chain, [0.3, 0.3])


def test_binomial_start_is_distribution():
    dist = onemax_binomial_start(30)
    assert dist.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(dist, binom.pmf(np.arange(31), 30, 0.5))


def test_geometric_tail_closed_form():
    p = 0.3
    curve = exact_tail(geometric_chain(p), 1, 40)
    for t in range(1, 41):
        assert curve.at_least(t) == pytest.approx((1 - p) ** (t - 1), rel=1e-12)
    assert curve.at_least(0) == 1.0


def test_deterministic_tail():
    curve = exact_tail(deterministic_chain(10), 10, 15)
    assert curve.at_least(10) == 1.0
    assert curve.at_least(11) == 0.0
    assert curve.less_than(10) == 0.0


def test_tail_matches_matrix_powers():
    chain = biased_walk()
    curve = exact_tail(chain, 10, 200)
    assert np.allclose(curve.values, dense_survival(chain, 10, 200), rtol=1e-10, atol=1e-300)


def test_tail_sum_is_expectation_onemax():
    chain = build_onemax_chain(100)
    start = onemax_binomial_start(100)
    curve = exact_tail(chain, start, 20000)
    assert curve.mean() == pytest.approx(exact_expectation(chain, start), abs=1e-6)


def test_tail_non_increasing():
    curve = exact_tail(build_leadingones_chain(5), uniform_start(build_leadingones_chain(5)), 300)
    assert np.all(np.diff(curve.values) <= 1e-15)


def test_drift_profile_two_state():
    p, lam = 0.3, 0.7
    chain = geometric_chain(p)
    g = build_potential(HSpec.constant(0.5))
    prof = exact_drift_profile(chain, g, lam)
    assert prof.drift[1] == pytest.approx(p)
    g1 = 2.0
    assert prof.mgf_neg[1] == pytest.approx((1 - p) + p * math.exp(-lam * g1), rel=1e-14)
    assert prof.mgf_pos[1] == pytest.approx((1 - p) + p * math.exp(lam * g1), rel=1e-14)
    assert prof.drift[0] == 0.0


def test_drift_profile_gap_label_rejected():
    chain = MarkovChain.from_rows([0, 0.5, 2], [{}, {0: 1.0}, {1: 1.0}])
    g = build_potential(HSpec.expression("x", 1.0, 2.0))
    with pytest.raises(StateSpaceError):
        exact_drift_profile(chain, g)


def test_multiplicative_mgf_on_onemax():
    # with g = (1 + ln x)/delta the factor exp(-delta * (g(X) - g(X'))) is X'/X
    # for X' >= 1, but exp(-delta * g(X)) = 1/(e X) for X' = 0
    n = 100
    delta = 1 / (math.e * n)
    chain = build_onemax_chain(n)
    g = build_potential(HSpec.multiplicative(delta, x_min=1.0, x_max=n))
    prof = exact_drift_profile(chain, g, delta)
    assert np.all(prof.mgf_neg[2:] <= 1 - delta)
    success = chain.matrix.toarray()[1, 0]
    assert prof.mgf_neg[1] == pytest.approx(1 - success + success / math.e, rel=1e-12)
    assert prof.mgf_neg[1] > 1 - delta


def test_parse_and_dump_roundtrip():
    text = """
    # geometric
    0 target
    1 0:0.25 1:0.75
    """
    chain = parse_chain(text)
    again = parse_chain(dump_chain(chain))
    assert np.array_equal(chain.labels, again.labels)
    assert np.array_equal(chain.target, again.target)
    assert np.allclose(chain.matrix.toarray(), again.matrix.toarray())
    assert exact_expectation(chain, 1) == pytest.approx(4.0)


@pytest.mark.parametrize("text", ["", "x 0:1", "0 target\n1 0:abc", "0 target\n1 5:1", "0 target\n1"])
def test_parse_errors(text):
    with pytest.raises((DomainError, StateSpaceError)):
        parse_chain(text)

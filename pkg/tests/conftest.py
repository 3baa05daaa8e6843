"""Shared helpers: independent dense-matrix oracles used to cross-check
the package's own solvers, plus small chain builders."""
from __future__ import annotations

import numpy as np
import pytest

from driftkit.oracle import MarkovChain


def dense_hitting_times(chain: MarkovChain) -> np.ndarray:
    """Fundamental-matrix solve (I - Q) t = 1 on the non-target block."""
    mat = chain.matrix.toarray()
    live = ~chain.target
    q = mat[np.ix_(live, live)]
    out = np.zeros(chain.size)
    out[live] = np.linalg.solve(np.eye(q.shape[0]) - q, np.ones(q.shape[0]))
    return out


def dense_survival(chain: MarkovChain, start_index: int, t_max: int) -> np.ndarray:
    """P(T >= t) for t = 0..t_max by explicit powers of the substochastic block."""
    mat = chain.matrix.toarray()
    live = ~chain.target
    q = mat[np.ix_(live, live)]
    pos = int(np.flatnonzero(live).tolist().index(start_index))
    vec = np.zeros(q.shape[0])
    vec[pos] = 1.0
    out = [1.0]
    for _ in range(t_max):
        out.append(vec.sum())
        vec = vec @ q
    return np.array(out)


def geometric_chain(p: float) -> MarkovChain:
    return MarkovChain.from_rows([0, 1], [{}, {0: p, 1: 1 - p}])


def deterministic_chain(length: int) -> MarkovChain:
    rows = [{}] + [{i - 1: 1.0} for i in range(1, length + 1)]
    return MarkovChain.from_rows(list(range(length + 1)), rows)


def biased_walk(down: float = 0.6, top: int = 10) -> MarkovChain:
    """Walk on 0..top; the top state moves down w.p. down-up and otherwise stays."""
    up = 1 - down
    rows = [{}]
    for i in range(1, top):
        rows.append({i - 1: down, i + 1: up})
    rows.append({top - 1: down - up, top: 1 - (down - up)})
    return MarkovChain.from_rows(list(range(top + 1)), rows)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance criteria report ------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])

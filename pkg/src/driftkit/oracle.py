"""Exact ground truth on finite absorbing Markov chains.

A :class:`MarkovChain` carries real state labels (distances), a sparse
row-stochastic transition matrix and a boolean target mask.  The solvers
give exact (to floating point) expected hitting times, survival curves
``P(T >= t)`` and per-state drift / moment-generating-function values.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg
from scipy.stats import binom

from .errors import ConvergenceError, DomainError, StateSpaceError

ROW_SUM_TOL = 1e-12
MAX_ONEMAX_N = 5000
MAX_LEADINGONES_N = 12
TARGET_WORDS = frozenset({"target", "t", "*", "absorbing"})


@dataclass(frozen=True)
class MarkovChain:
    """Finite chain with real labels and a target set.

    Parameters
    ----------
    labels : ndarray of float
        Distance label of each state.
    matrix : scipy.sparse.csr_matrix
        Row-stochastic transition matrix.
    target : ndarray of bool
        Target states; the hitting time is the first visit to one of them.
    """

    labels: np.ndarray
    matrix: sp.csr_matrix
    target: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=float)
        target = np.asarray(self.target, dtype=bool)
        mat = sp.csr_matrix(self.matrix, dtype=float)
        mat.sum_duplicates()
        mat.sort_indices()
        size = labels.size
        if size == 0:
            raise StateSpaceError("chain has no states")
        if mat.shape != (size, size) or target.shape != (size,):
            raise StateSpaceError(f"shape mismatch: {size} labels, matrix {mat.shape}, target {target.shape}")
        if not np.all(np.isfinite(labels)):
            raise StateSpaceError("labels must be finite")
        if mat.nnz and (np.any(mat.data < 0) or not np.all(np.isfinite(mat.data))):
            raise StateSpaceError("transition probabilities must be finite and non-negative")
        sums = np.asarray(mat.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            i = int(bad[0])
            raise StateSpaceError(f"row {i} sums to {sums[i]!r}, not 1")
        if not target.any():
            raise StateSpaceError("target set is empty")
        for arr in (labels, target):
            arr.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "matrix", mat)
        unreachable = _unreachable_states(mat, target)
        if unreachable.size:
            raise StateSpaceError(f"target unreachable from state {int(unreachable[0])} "
                                  f"(label {labels[unreachable[0]]})")

    @property
    def size(self) -> int:
        return self.labels.size

    @classmethod
    def from_dense(cls, labels, matrix, target=None, a: float = 0.0) -> "MarkovChain":
        labels = np.asarray(labels, dtype=float)
        if target is None:
            target = labels <= a
        return cls(labels, sp.csr_matrix(np.asarray(matrix, dtype=float)), np.asarray(target, dtype=bool))

    @classmethod
    def from_rows(cls, labels, rows: Sequence[dict], target=None, a: float = 0.0) -> "MarkovChain":
        """Build from one ``{next_index: prob}`` dict per state; an empty
        row becomes a self loop."""
        labels = np.asarray(labels, dtype=float)
        r, c, v = [], [], []
        for i, row in enumerate(rows):
            for j, p in (row.items() if row else [(i, 1.0)]):
                r.append(i)
                c.append(int(j))
                v.append(float(p))
        mat = sp.csr_matrix((v, (r, c)), shape=(labels.size, labels.size))
        if target is None:
            target = labels <= a
        return cls(labels, mat, np.asarray(target, dtype=bool))

    def absorbing(self) -> "MarkovChain":
        """Copy in which every target state is a self loop."""
        mat = self.matrix.tolil()
        for i in np.flatnonzero(self.target):
            mat.rows[i] = [int(i)]
            mat.data[i] = [1.0]
        return MarkovChain(self.labels, mat.tocsr(), self.target)

    def with_target(self, a: float) -> "MarkovChain":
        return MarkovChain(self.labels, self.matrix, self.labels <= a)

    @property
    def is_monotone(self) -> bool:
        """True when no transition of positive probability raises the label."""
        coo = self.matrix.tocoo()
        live = coo.data > 0
        return not np.any(self.labels[coo.col[live]] > self.labels[coo.row[live]])

    def state_index(self, label: float) -> int:
        hits = np.flatnonzero(self.labels == float(label))
        if hits.size != 1:
            raise DomainError(f"label {label!r} matches {hits.size} states; pass a state index or distribution")
        return int(hits[0])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]


def _unreachable_states(mat: sp.csr_matrix, target: np.ndarray) -> np.ndarray:
    # reverse BFS from targets along positive-probability edges
    rev = mat.T.tocsr()
    seen = target.copy()
    queue = deque(np.flatnonzero(target).tolist())
    while queue:
        j = queue.popleft()
        lo, hi = rev.indptr[j], rev.indptr[j + 1]
        for i, p in zip(rev.indices[lo:hi], rev.data[lo:hi]):
            if p > 0 and not seen[i]:
                seen[i] = True
                queue.append(int(i))
    return np.flatnonzero(~seen)


def start_distribution(chain: MarkovChain, start) -> np.ndarray:
    """Normalise ``start`` (a state index or a distribution) to a vector."""
    if np.ndim(start) == 0:
        i = int(start)
        if i != start or not 0 <= i < chain.size:
            raise DomainError(f"start index {start!r} is not a state of a {chain.size}-state chain")
        dist = np.zeros(chain.size)
        dist[i] = 1.0
        return dist
    dist = np.asarray(start, dtype=float)
    if dist.shape != (chain.size,) or np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-9:
        raise DomainError("start distribution must be a probability vector over the chain's states")
    return dist


# chain builders ----------------------------------------------------------

def build_onemax_chain(n: int) -> MarkovChain:
    """Zero-count chain of the (1+1) EA on OneMax with n bits.

    State ``i`` is the number of zeros.  Flipping ``a`` zeros and ``b`` ones
    is accepted iff ``b <= a``; the binomial factors come from log-space
    pmfs and underflowed terms are dropped.
    """
    n = int(n)
    if not 1 <= n <= MAX_ONEMAX_N:
        raise StateSpaceError(f"OneMax chain needs 1 <= n <= {MAX_ONEMAX_N}, got {n}")
    p = 1.0 / n
    rows, cols, vals = [0], [0], [1.0]
    for i in range(1, n + 1):
        a_pmf = _binom_pmf(i, p)
        b_pmf = _binom_pmf(n - i, p)
        # corr[k] = sum_b A[b + d] B[b] with d = k - (len(B) - 1)
        corr = np.correlate(a_pmf, b_pmf, mode="full")
        down = corr[len(b_pmf):]
        d = np.arange(1, down.size + 1)
        keep = (down > 0) & (d <= i)
        down, d = down[keep], d[keep]
        off = math.fsum(down)
        rows += [i] * (d.size + 1)
        cols += (i - d).tolist() + [i]
        vals += down.tolist() + [1.0 - off]
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))
    labels = np.arange(n + 1, dtype=float)
    return MarkovChain(labels, mat, labels == 0)


def _binom_pmf(k: int, p: float) -> np.ndarray:
    if k == 0:
        return np.ones(1)
    with np.errstate(under="ignore"):
        pmf = np.exp(binom.logpmf(np.arange(k + 1), k, p))
    nz = np.flatnonzero(pmf > 0)
    return pmf[: nz[-1] + 1]


def leading_ones_table(n: int) -> np.ndarray:
    """LO value of every n-bit integer, bit j being position j."""
    vals = np.arange(1 << n)
    lo = np.zeros(1 << n, dtype=np.int64)
    run = np.ones(1 << n, dtype=bool)
    for j in range(n):
        run &= ((vals >> j) & 1).astype(bool)
        lo += run
    return lo


def build_leadingones_chain(n: int, a: int | None = None) -> MarkovChain:
    """Full ``2**n`` chain of the (1+1) EA on LeadingOnes.

    Labels are ``max(0, a - LO(x))``; targets are states with label 0.
    """
    n = int(n)
    if n < 1:
        raise StateSpaceError("n must be positive")
    if n > MAX_LEADINGONES_N:
        raise StateSpaceError(f"LeadingOnes chain has 2^{n} states; the limit is n <= {MAX_LEADINGONES_N}")
    a = n if a is None else int(a)
    if not 0 <= a <= n:
        raise DomainError(f"target a={a} outside [0, {n}]")
    size = 1 << n
    lo = leading_ones_table(n)
    masks = np.arange(size)
    popcount = np.array([bin(m).count("1") for m in range(size)])
    p = 1.0 / n
    mask_prob = np.power(p, popcount) * np.power(1.0 - p, n - popcount)
    rows = []
    for s in range(size):
        offspring = s ^ masks
        dest = np.where(lo[offspring] >= lo[s], offspring, s)
        row = np.bincount(dest, weights=mask_prob, minlength=size)
        off = row.copy()
        off[s] = 0.0
        row[s] = 1.0 - math.fsum(off)
        rows.append(sp.csr_matrix(row))
    mat = sp.vstack(rows, format="csr")
    mat.eliminate_zeros()
    labels = np.maximum(0, a - lo).astype(float)
    return MarkovChain(labels, mat, labels == 0)


# explicit chain text format -------------------------------------------------

def parse_chain(text: str, a: float | None = None) -> MarkovChain:
    """Parse the line format ``label [target] j:p j:p ...``.

    ``#`` starts a comment.  Target states with no transitions become
    self loops.  Without any ``target`` marker, states with label ``<= a``
    (default 0) are the targets.
    """
    labels, marks, rows = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DomainError(f"line {lineno}: bad state label {tokens[0]!r}") from None
        is_target = len(tokens) > 1 and tokens[1].lower() in TARGET_WORDS
        row = {}
        for tok in tokens[2 if is_target else 1:]:
            try:
                j, p = tok.split(":")
                j = int(j)
                row[j] = row.get(j, 0.0) + float(p)
            except ValueError:
                raise DomainError(f"line {lineno}: bad transition {tok!r}") from None
        labels.append(label)
        marks.append(is_target)
        rows.append(row)
    if not labels:
        raise DomainError("chain file has no states")
    for i, row in enumerate(rows):
        if any(not 0 <= j < len(labels) for j in row):
            raise DomainError(f"state {i} points to an index outside 0..{len(labels) - 1}")
        if not row:
            if not marks[i] and not (a is None and labels[i] <= 0) and not (a is not None and labels[i] <= a):
                raise DomainError(f"non-target state {i} has no transitions")
            row[i] = 1.0
    labels_arr = np.array(labels)
    if any(marks):
        target = np.array(marks)
    else:
        target = labels_arr <= (0.0 if a is None else a)
    return MarkovChain.from_rows(labels_arr, rows, target=target)


def dump_chain(chain: MarkovChain) -> str:
    lines = ["# label [target] next:prob ..."]
    for i in range(chain.size):
        cols, vals = chain.row(i)
        parts = [repr(float(chain.labels[i]))]
        if chain.target[i]:
            parts.append("target")
        parts += [f"{int(j)}:{float(p)!r}" for j, p in zip(cols, vals) if p > 0]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


# solvers ----------------------------------------------------------------

def expected_hitting_times(chain: MarkovChain) -> np.ndarray:
    """Expected hitting time of the target set from every state."""
    if chain.is_monotone:
        return _back_substitution(chain)
    return _dense_solve(chain)


def _back_substitution(chain: MarkovChain) -> np.ndarray:
    # blocks of equal label, lowest first; no transition goes up
    E = np.zeros(chain.size)
    live = np.flatnonzero(~chain.target)
    if live.size == 0:
        return E
    order = live[np.argsort(chain.labels[live], kind="stable")]
    lab = chain.labels[order]
    splits = np.flatnonzero(np.diff(lab)) + 1
    mat = chain.matrix
    for block in np.split(order, splits):
        if block.size == 1:
            i = int(block[0])
            cols, vals = chain.row(i)
            off = cols != i
            leave = math.fsum(vals[off])
            if leave <= 0:
                raise ConvergenceError(f"state {i} cannot leave its level", math.inf)
            E[i] = (1.0 + float(np.dot(vals[off], E[cols[off]]))) / leave
            continue
        sub = mat[block]
        rhs = 1.0 + sub @ E
        inner = sub[:, block].toarray()
        system = -inner
        # diagonal 1 - P_ii as the sum of the rest of the row, for accuracy
        full_off = np.asarray(sub.sum(axis=1)).ravel() - np.diag(inner)
        system[np.diag_indices_from(system)] = full_off
        try:
            E[block] = scipy.linalg.solve(system, rhs)
        except scipy.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular level block: {exc}", math.nan) from exc
    return E


def _dense_solve(chain: MarkovChain) -> np.ndarray:
    live = np.flatnonzero(~chain.target)
    E = np.zeros(chain.size)
    if live.size == 0:
        return E
    Q = chain.matrix[live][:, live]
    ones = np.ones(live.size)
    if live.size > 6000:
        A = sp.identity(live.size, format="csc") - Q.tocsc()
        x = scipy.sparse.linalg.spsolve(A, ones)
        apply = lambda v: A @ v  # noqa: E731
        solve = lambda r: scipy.sparse.linalg.spsolve(A, r)  # noqa: E731
    else:
        A = np.eye(live.size) - Q.toarray()
        try:
            lu = scipy.linalg.lu_factor(A)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise ConvergenceError(f"singular hitting-time system: {exc}", math.nan) from exc
        x = scipy.linalg.lu_solve(lu, ones)
        apply = lambda v: A @ v  # noqa: E731
        solve = lambda r: scipy.linalg.lu_solve(lu, r)  # noqa: E731
    for _ in range(4):
        resid = ones - apply(x)
        if np.max(np.abs(resid)) <= 1e-12 * (1 + np.max(np.abs(x))):
            break
        x = x + solve(resid)
    resid = np.max(np.abs(ones - apply(x)))
    if not np.all(np.isfinite(x)) or resid > 1e-9 * (1 + np.max(np.abs(x))):
        raise ConvergenceError(f"hitting-time solve residual {resid:.3g} too large", float(np.max(x)))
    E[live] = x
    return E


def exact_expectation(chain: MarkovChain, start) -> float:
    """Exact ``E[T]`` from a state index or start distribution.

    Examples
    --------
    >>> chain = MarkovChain.from_dense([0, 1], [[1, 0], [0.25, 0.75]])
    >>> exact_expectation(chain, 1)
    4.0
    """
    dist = start_distribution(chain, start)
    E = expected_hitting_times(chain)
    return math.fsum(dist * E)


@dataclass(frozen=True)
class SurvivalCurve:
    """``values[t] = P(T >= t)`` for ``t = 0..len-1``.

    ``truncated`` is set when the surviving mass underflowed before the
    requested horizon; later entries are then unknown (but below 1e-280).
    """

    values: np.ndarray
    truncated: bool

    def at_least(self, t: int) -> float:
        t = int(math.ceil(t))
        if t <= 0:
            return 1.0
        if t < self.values.size:
            return float(self.values[t])
        return 0.0

    def less_than(self, t: float) -> float:
        return 1.0 - self.at_least(t)

    def mean(self) -> float:
        return math.fsum(self.values[1:])


_UNDERFLOW = 1e-280


def exact_tail(chain: MarkovChain, start, t_max: int) -> SurvivalCurve:
    """Survival probabilities ``P(T >= t)`` for ``t = 0..t_max``."""
    t_max = int(t_max)
    if t_max < 0:
        raise DomainError("t_max must be non-negative")
    dist = start_distribution(chain, start)
    live = ~chain.target
    Qt = chain.matrix[live][:, live].T.tocsr()
    v = dist[live].copy()
    out = np.zeros(t_max + 1)
    out[0] = 1.0
    truncated = False
    last = 1.0
    for t in range(1, t_max + 1):
        mass = math.fsum(v)
        if mass == 0.0 and last >= _UNDERFLOW:
            break
        if mass < _UNDERFLOW:
            truncated = True
            out = out[:t]
            break
        out[t] = mass
        last = mass
        v = Qt @ v
    return SurvivalCurve(out, truncated)


# drift and mgf ---------------------------------------------------------

@dataclass(frozen=True)
class DriftProfile:
    """Exact per-state quantities; entries at target states are 0.

    ``g_drift`` and the mgf arrays are present only when ``g`` (and
    ``lam``) were supplied.  ``mgf_neg[i] = E(exp(-lam * Delta))`` and
    ``mgf_pos[i] = E(exp(lam * Delta))`` with ``Delta = g(X_t) - g(X_{t+1})``.
    """

    drift: np.ndarray
    max_jump: np.ndarray
    g_values: np.ndarray | None = None
    g_drift: np.ndarray | None = None
    lam: float | None = None
    mgf_neg: np.ndarray | None = None
    mgf_pos: np.ndarray | None = None


def potential_on_labels(chain: MarkovChain, g) -> np.ndarray:
    """Evaluate ``g`` on every label; a gap label is a structural error."""
    try:
        return np.asarray(g.values(chain.labels) if hasattr(g, "values") else [g(x) for x in chain.labels],
                          dtype=float)
    except DomainError as exc:
        raise StateSpaceError(f"chain label outside the potential's domain: {exc}") from exc


def exact_drift_profile(chain: MarkovChain, g=None, lam: float | None = None) -> DriftProfile:
    size = chain.size
    coo = chain.matrix.tocoo()
    live_edge = (~chain.target[coo.row]) & (coo.data > 0)
    r, c, p = coo.row[live_edge], coo.col[live_edge], coo.data[live_edge]
    step = chain.labels[r] - chain.labels[c]
    drift = _row_sums(r, p * step, size)
    max_jump = np.zeros(size)
    np.maximum.at(max_jump, r, np.abs(step))
    if g is None:
        return DriftProfile(drift, max_jump)
    gv = potential_on_labels(chain, g)
    delta = gv[r] - gv[c]
    g_drift = _row_sums(r, p * delta, size)
    if lam is None:
        return DriftProfile(drift, max_jump, gv, g_drift)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    with np.errstate(over="ignore"):
        mgf_neg = _row_sums(r, p * np.exp(-lam * delta), size)
        mgf_pos = _row_sums(r, p * np.exp(lam * delta), size)
    return DriftProfile(drift, max_jump, gv, g_drift, float(lam), mgf_neg, mgf_pos)


def _row_sums(rows: np.ndarray, vals: np.ndarray, size: int) -> np.ndarray:
    # deterministic compensated per-row reduction
    out = np.zeros(size)
    if rows.size == 0:
        return out
    order = np.argsort(rows, kind="stable")
    rows, vals = rows[order], vals[order]
    bounds = np.flatnonzero(np.diff(rows)) + 1
    for chunk_rows, chunk in zip(np.split(rows, bounds), np.split(vals, bounds)):
        out[chunk_rows[0]] = math.fsum(chunk)
    return out


def onemax_binomial_start(n: int) -> np.ndarray:
    """Zero-count distribution of a uniform random n-bit string."""
    return binom.pmf(np.arange(n + 1), n, 0.5)


def uniform_start(chain: MarkovChain) -> np.ndarray:
    return np.full(chain.size, 1.0 / chain.size)


def level_lumped_chain(chain: MarkovChain, weights: np.ndarray | None = None) -> MarkovChain:
    """Lump states sharing a label, averaging rows with ``weights``.

    Exact only when the chain is lumpable; otherwise it is an
    approximation useful for building level-transition tables.
    """
    uniq, inv = np.unique(chain.labels, return_inverse=True)
    w = np.ones(chain.size) if weights is None else np.asarray(weights, dtype=float)
    k = uniq.size
    agg = sp.csr_matrix((np.ones(chain.size), (np.arange(chain.size), inv)), shape=(chain.size, k))
    weighted = sp.diags(w) @ chain.matrix @ agg
    lump = sp.csr_matrix((np.ones(chain.size), (inv, np.arange(chain.size))), shape=(k, chain.size)) @ weighted
    tot = np.bincount(inv, weights=w, minlength=k)
    lump = sp.diags(1.0 / tot) @ lump
    lump = sp.csr_matrix(lump)
    # renormalise rounding
    sums = np.asarray(lump.sum(axis=1)).ravel()
    lump = sp.diags(1.0 / sums) @ lump
    target = np.zeros(k, dtype=bool)
    np.logical_or.at(target, inv, chain.target)
    return MarkovChain(uniq.astype(float), sp.csr_matrix(lump), target)


def leadingones_suffix_drift(n: int, a: int, i: int, capped: bool = False) -> float:
    """Expected one-step gain at distance ``i``, averaged over all states
    ``1^{a-i} 0 s`` with a uniform suffix ``s``.

    With ``capped=False`` the gain is the increase of the LO value itself;
    with ``capped=True`` it is the decrease of ``max(0, a - LO)``, which is
    smaller when ``a < n`` because gains past ``a`` are cut off.

    Every suffix and every mutation mask of the suffix is enumerated with
    its exact probability.  Flipping any of the leading ones is rejected and
    leaving the zero alone keeps the distance, so those parts of the mask
    only enter through their probabilities.
    """
    n, a, i = int(n), int(a), int(i)
    if not 1 <= i <= a <= n:
        raise DomainError(f"need 1 <= i <= a <= n, got n={n}, a={a}, i={i}")
    if n > MAX_LEADINGONES_N:
        raise StateSpaceError(f"exhaustive enumeration is limited to n <= {MAX_LEADINGONES_N}")
    p = 1.0 / n
    k = n - (a - i) - 1
    size = 1 << k
    lo = leading_ones_table(k) if k > 0 else np.zeros(1, dtype=np.int64)
    masks = np.arange(size)
    pop = np.array([bin(m).count("1") for m in range(size)])
    mask_prob = np.power(p, pop) * np.power(1 - p, k - pop)
    # gain[s, m]: decrease of the distance when suffix s is mutated by m
    mutated = np.bitwise_xor.outer(masks, masks)
    gain = 1 + lo[mutated]
    if capped:
        gain = np.minimum(i, gain)
    per_suffix = gain @ mask_prob
    mean = math.fsum(per_suffix) / size
    return (1 - p) ** (a - i) * p * mean

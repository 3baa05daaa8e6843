"""Benchmark processes: the (1+1) EA on OneMax, linear functions and
LeadingOnes, plus explicit finite chains, together with the drift and
running-time formulas used to check them.

Each step draws the number of flipped bits from Binomial(n, 1/n) by
inversion and then the distinct positions by rejection, so a step costs
O(1) expected work.  The numba kernels in :mod:`driftkit.kernels` repeat
exactly this arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .oracle import MarkovChain
from .rng import Xoshiro256

ONEMAX = "onemax"
LINEAR = "linear"
LEADINGONES = "leadingones"
CHAIN = "chain"
FAMILIES = (ONEMAX, LINEAR, LEADINGONES, CHAIN)
FAMILY_CODE = {ONEMAX: 0, LINEAR: 1, LEADINGONES: 2}

LO_CONSTANT = (8 * math.e - 1) / (4 * math.e)
# eta = delta * lambda^2 / (D - 1 - lambda) evaluated at lambda = 1/(4en),
# D = 1 + 2/n, delta = n^-1/2 gives n^-3/2 / (4e(8e - 1)), far below LO_CONSTANT
LO_CONSTANT_REDERIVED = 1 / (4 * math.e * (8 * math.e - 1))


@dataclass(frozen=True)
class ProcessSpec:
    """What to simulate.

    Parameters
    ----------
    family : {"onemax", "linear", "leadingones", "chain"}
    n : int
        Bit length (ignored for chains).
    weights : tuple of float, optional
        Non-zero weights of a linear function; the optimum sets bit j to 1
        iff ``weights[j] > 0``.
    a : int, optional
        LeadingOnes target value; the distance is ``max(0, a - LO(x))``.
        Defaults to ``n``.
    init : "uniform" or tuple of int
        Uniform random bit string or a fixed one.
    chain, start
        For ``family="chain"``: the chain and a start index or distribution.
    """

    family: str
    n: int = 0
    weights: tuple | None = None
    a: int | None = None
    init: object = "uniform"
    chain: MarkovChain | None = field(default=None, compare=False)
    start: object = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown process family {self.family!r}")
        if self.family == CHAIN:
            if self.chain is None:
                raise DomainError("chain family needs a chain")
            if self.start is None:
                raise DomainError("chain family needs a start index or distribution")
            return
        n = int(self.n)
        if n < 1:
            raise DomainError(f"bit length must be >= 1, got {self.n}")
        object.__setattr__(self, "n", n)
        if self.family == LINEAR:
            if self.weights is None or len(self.weights) != n:
                raise DomainError("linear functions need one weight per bit")
            w = tuple(float(x) for x in self.weights)
            if any(x == 0 or not math.isfinite(x) for x in w):
                raise DomainError("linear weights must be finite and non-zero")
            object.__setattr__(self, "weights", w)
        if self.family == LEADINGONES:
            a = n if self.a is None else int(self.a)
            if not 0 <= a <= n:
                raise DomainError(f"target a={self.a} outside [0, {n}]")
            object.__setattr__(self, "a", a)
        if self.init != "uniform":
            bits = tuple(int(b) for b in self.init)
            if len(bits) != n or any(b not in (0, 1) for b in bits):
                raise DomainError("fixed init must be a 0/1 sequence of length n")
            object.__setattr__(self, "init", bits)

    @classmethod
    def onemax(cls, n: int, start_zeros: int | None = None) -> "ProcessSpec":
        init = "uniform" if start_zeros is None else _zeros_first(n, start_zeros)
        return cls(ONEMAX, n, init=init)

    @classmethod
    def linear(cls, n: int, weights, start_zeros: int | None = None) -> "ProcessSpec":
        init = "uniform" if start_zeros is None else _zeros_first(n, start_zeros)
        return cls(LINEAR, n, weights=tuple(weights), init=init)

    @classmethod
    def leadingones(cls, n: int, a: int | None = None, init="uniform") -> "ProcessSpec":
        return cls(LEADINGONES, n, a=a, init=init)

    @classmethod
    def explicit(cls, chain: MarkovChain, start) -> "ProcessSpec":
        if np.ndim(start) > 0:
            start = tuple(float(p) for p in start)
        return cls(CHAIN, chain=chain, start=start)

    def optimum_bits(self) -> np.ndarray:
        if self.family == LINEAR:
            return (np.asarray(self.weights) > 0).astype(np.int8)
        return np.ones(self.n, dtype=np.int8)

    def describe(self) -> dict:
        out = {"family": self.family}
        if self.family == CHAIN:
            out["states"] = int(self.chain.size)
            out["start"] = self.start if np.ndim(self.start) == 0 else list(self.start)
            return out
        out["n"] = self.n
        if self.weights is not None:
            out["weights"] = list(self.weights)
        if self.a is not None:
            out["a"] = self.a
        out["init"] = self.init if self.init == "uniform" else "".join(map(str, self.init))
        return out


def _zeros_first(n: int, zeros: int) -> tuple:
    if not 0 <= zeros <= n:
        raise DomainError(f"start_zeros={zeros} outside [0, {n}]")
    return (0,) * zeros + (1,) * (n - zeros)


def leading_ones(bits) -> int:
    k = 0
    for b in bits:
        if not b:
            break
        k += 1
    return k


def distance_of(spec: ProcessSpec, bits) -> float:
    """Tracked distance: zeros (OneMax), mismatches to the optimum (linear),
    or ``max(0, a - LO)`` (LeadingOnes)."""
    bits = np.asarray(bits)
    if spec.family == ONEMAX:
        return float(np.count_nonzero(bits == 0))
    if spec.family == LINEAR:
        return float(np.count_nonzero(bits != spec.optimum_bits()))
    return float(max(0, spec.a - leading_ones(bits)))


@dataclass(frozen=True)
class ProcessState:
    """Current search point with its cached distance and step count.

    ``index`` is the chain state for explicit chains (``bits`` is then
    empty) and the LO value for LeadingOnes.
    """

    bits: tuple
    distance: float
    steps: int = 0
    index: int = 0


def mutation_constants(n: int) -> tuple[float, float]:
    """``(1-1/n)**n`` and ``(1/n)/(1-1/n)`` for the flip-count inversion."""
    if n == 1:
        return 0.0, math.inf
    p = 1.0 / n
    return (1.0 - p) ** n, p / (1.0 - p)


def draw_flip_count(n: int, rng: Xoshiro256, q_n: float, ratio: float) -> int:
    if n == 1:
        return 1
    u = rng.random()
    k = 0
    prob = q_n
    cdf = prob
    while u >= cdf and k < n:
        prob = prob * (n - k) / (k + 1) * ratio
        k += 1
        cdf += prob
    return k


def draw_positions(n: int, count: int, rng: Xoshiro256) -> list[int]:
    chosen: list[int] = []
    while len(chosen) < count:
        pos = rng.below(n)
        if pos not in chosen:
            chosen.append(pos)
    return chosen


def initial_state(spec: ProcessSpec, rng: Xoshiro256) -> ProcessState:
    if spec.family == CHAIN:
        if np.ndim(spec.start) == 0:
            idx = int(spec.start)
        else:
            idx = sample_index(np.asarray(spec.start, dtype=float), rng.random())
        return ProcessState((), float(spec.chain.labels[idx]), 0, idx)
    if spec.init == "uniform":
        bits = tuple(rng.next_u64() >> 63 for _ in range(spec.n))
    else:
        bits = spec.init
    lo = leading_ones(bits) if spec.family == LEADINGONES else 0
    return ProcessState(bits, distance_of(spec, bits), 0, lo)


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF pick: first index whose running sum exceeds ``u``."""
    cum = 0.0
    last = 0
    for j, p in enumerate(probs):
        if p > 0:
            last = j
            cum += p
            if u < cum:
                return j
    return last


def step(spec: ProcessSpec, state: ProcessState, rng: Xoshiro256) -> ProcessState:
    """One iteration of the process; returns the new state.

    Bit strings: standard bit mutation, and the offspring replaces the
    parent iff it is not worse.  Chains: one transition.
    """
    if spec.family == CHAIN:
        cols, vals = spec.chain.row(state.index)
        j = int(cols[sample_index(vals, rng.random())])
        return ProcessState((), float(spec.chain.labels[j]), state.steps + 1, j)
    n = spec.n
    q_n, ratio = mutation_constants(n)
    k = draw_flip_count(n, rng, q_n, ratio)
    positions = draw_positions(n, k, rng)
    bits = list(state.bits)
    dist = state.distance
    lo = state.index
    accept = True
    if spec.family == ONEMAX:
        change = 0
        for pos in positions:
            change += -1 if bits[pos] == 0 else 1
        accept = change <= 0
        new_dist = dist + change
    elif spec.family == LINEAR:
        gain = 0.0
        change = 0
        for pos in positions:
            w = spec.weights[pos]
            if bits[pos] == 0:
                gain += w
            else:
                gain -= w
            optimal = 1 if w > 0 else 0
            change += 1 if bits[pos] == optimal else -1
        accept = gain >= 0.0
        new_dist = dist + change
    else:
        for pos in positions:
            if pos < lo:
                accept = False
                break
    if not accept:
        return ProcessState(state.bits, dist, state.steps + 1, lo)
    for pos in positions:
        bits[pos] ^= 1
    if spec.family == LEADINGONES:
        while lo < n and bits[lo] == 1:
            lo += 1
        new_dist = float(max(0, spec.a - lo))
    return ProcessState(tuple(bits), float(new_dist), state.steps + 1, lo)


def simulate_trial(spec: ProcessSpec, threshold: float, rng: Xoshiro256,
                   step_cap: int) -> tuple[int, bool]:
    """Pure-Python reference run: ``(T, capped)``."""
    state = initial_state(spec, rng)
    hit = _hit_test(spec, threshold)
    while not hit(state) and state.steps < step_cap:
        state = step(spec, state, rng)
    return state.steps, not hit(state)


def _hit_test(spec: ProcessSpec, threshold):
    if spec.family == CHAIN and threshold is None:
        target = spec.chain.target
        return lambda s: bool(target[s.index])
    thr = 0.0 if threshold is None else float(threshold)
    return lambda s: s.distance <= thr


# formulas -----------------------------------------------------------------

def onemax_drift_bounds(n: int, x: int) -> tuple[float, float]:
    """Lower and upper bounds on the OneMax zero-count drift at ``x`` zeros.

    Examples
    --------
    >>> onemax_drift_bounds(2, 1)[0]
    0.25
    """
    n, x = int(n), int(x)
    if n < 1 or not 1 <= x <= n:
        raise DomainError(f"need 1 <= x <= n, got n={n}, x={x}")
    if x == n:
        return 1.0, 1.0
    lower = (1 - 1 / n) ** (n - x) * x / n
    upper = ((1 - 1 / n) * (1 + x / (n - 1) ** 2)) ** (n - x) * x / n
    return lower, upper


def onemax_expected_bounds(n: int) -> tuple[float, float]:
    """Leading-order bracket ``en ln n - 5.9338 n`` and ``en ln n - 0.1369 n``.

    The O(1) and o(n) remainder terms are dropped.
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    base = math.e * n * math.log(n)
    return base - 5.9338 * n, base - 0.1369 * n


def leadingones_exact_drift(n: int, a: int, i: int) -> float:
    """Expected one-step decrease of ``max(0, a - LO)`` at distance ``i``."""
    n, a, i = int(n), int(a), int(i)
    if not (1 <= i <= a <= n):
        raise DomainError(f"need 1 <= i <= a <= n, got n={n}, a={a}, i={i}")
    return (2.0 - 2.0 ** (-n + a - i + 1)) * (1 - 1 / n) ** (a - i) * (1 / n)


def leadingones_expected(n: int, a: int) -> float:
    """``(n^2 - n)/2 * ((1 + 1/(n-1))^a - 1)`` from uniform initialisation."""
    n, a = int(n), int(a)
    if n < 2:
        raise DomainError("n must be at least 2")
    if not 0 <= a <= n:
        raise DomainError(f"a={a} outside [0, {n}]")
    return (n * n - n) / 2 * ((1 + 1 / (n - 1)) ** a - 1)


@dataclass(frozen=True)
class TailPrediction:
    upper_t: float
    upper_prob: float
    lower_t: float
    lower_prob: float
    notes: tuple = ()
    extra: dict = field(default_factory=dict)


def leadingones_tail_predictions(n: int, a: int, r: float) -> TailPrediction:
    """Concentration thresholds for ``T(a)`` with the explicit constant
    ``C = (8e-1)/(4e)``.

    ``upper_t`` holds with failure probability ``exp(-C r n^{-3/2})``; the
    lower side additionally fails with probability ``exp(-Omega(log^2 n))``,
    reported only symbolically.  ``log`` is base 2.  ``extra`` also holds the
    threshold ``U + 2 e n^{3/2} + 2r`` at which the same probability is
    backed by the explicit derivation, and the constant ``C_rederived``
    that the stated choices of ``lambda``, ``D`` and ``delta`` actually give
    (with its failure probability ``prob_rederived``).
    """
    n, a = int(n), int(a)
    if n < 2:
        raise DomainError("n must be at least 2")
    if r < 0:
        raise DomainError("r must be non-negative")
    log_n = math.log2(n)
    growth = (1 + 1 / (n - 1)) ** a - 1
    prob = math.exp(-LO_CONSTANT * r * n ** -1.5)
    notes = ["lower-side probability omits an exp(-Omega(log^2 n)) initialisation term"]
    upper_t = lower_t = math.nan
    upper_prob = lower_prob = math.nan
    if 0 < a <= n - log_n:
        upper_t = n * n / 2 * growth + r
        upper_prob = prob
    else:
        notes.append(f"upper threshold needs 0 < a <= n - log2 n = {n - log_n:.4g}")
    if log_n ** 2 - 1 <= a <= n:
        lower_t = (n * n - n) / 2 * (growth - 2 * log_n ** 2 / n) - r
        lower_prob = prob
    else:
        notes.append(f"lower threshold needs log2^2 n - 1 = {log_n ** 2 - 1:.4g} <= a <= n")
    if math.isnan(upper_t) and math.isnan(lower_t):
        raise DomainError(f"a={a} is outside both admissible ranges for n={n}")
    u_sum = n * n / 2 * growth
    extra = {
        "C": LO_CONSTANT,
        "C_rederived": LO_CONSTANT_REDERIVED,
        "prob_rederived": math.exp(-LO_CONSTANT_REDERIVED * r * n ** -1.5),
        "explicit_upper_t": u_sum + 2 * math.e * n ** 1.5 + 2 * r,
        "explicit_lower_t": (n * n - n) / 2 * (growth - log_n ** 2 / n) - r - math.e * n ** 1.5,
    }
    return TailPrediction(upper_t, upper_prob, lower_t, lower_prob, tuple(notes), extra)


def onemax_tail_predictions(n: int, r: float, c_lower: float) -> TailPrediction:
    """OneMax thresholds ``en ln n - c n - r e n`` (failure ``e^{-r/2}``) and
    ``en ln n + r e n`` (failure ``e^{-r}``)."""
    if n < 2:
        raise DomainError("n must be at least 2")
    if r < 0:
        raise DomainError("r must be non-negative")
    base = math.e * n * math.log(n)
    return TailPrediction(
        upper_t=base + r * math.e * n,
        upper_prob=math.exp(-r),
        lower_t=base - c_lower * n - r * math.e * n,
        lower_prob=math.exp(-r / 2),
        notes=(f"c_lower={c_lower} is caller-supplied",),
    )

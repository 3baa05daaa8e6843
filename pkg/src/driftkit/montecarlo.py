"""Seeded, parallel Monte Carlo estimation of hitting times.

Trial ``i`` always uses the stream derived from ``(master_seed, i)`` (see
:mod:`driftkit.rng`) and the trials are cut into fixed chunks, so the
output does not depend on the number of worker threads.
"""
from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import kernels
from .errors import DomainError, EstimationError
from .processes import CHAIN, FAMILY_CODE, ProcessSpec, mutation_constants
from .rng import GENERATOR_ID, MASK64

CHUNK = 2048
QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
DEFAULT_CHAIN_CAP = 10_000_000


def default_step_cap(spec: ProcessSpec) -> int:
    """``100 e n ln n`` for bit strings (at least 1000); 10^7 for chains."""
    if spec.family == CHAIN:
        return DEFAULT_CHAIN_CAP
    n = spec.n
    return max(1000, math.ceil(100 * math.e * n * math.log(max(n, 2))))


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("DRIFTKIT_WORKERS")
        workers = int(env) if env else 1
    if workers < 1:
        raise DomainError("workers must be >= 1")
    return int(workers)


@dataclass(frozen=True)
class HitRecord:
    trial: int
    time: int
    capped: bool


@dataclass(frozen=True)
class EmpiricalStats:
    """Distribution summary of simulated hitting times.

    Mean, variance and standard error use only uncapped trials; ``valid``
    is False whenever any trial hit the step cap.
    """

    n_trials: int
    mean: float
    variance: float
    std_error: float
    quantiles: dict
    histogram: tuple
    bucket_width: float
    capped_count: int
    master_seed: int
    generator_id: str
    step_cap: int
    times: np.ndarray = field(repr=False, compare=False)
    capped: np.ndarray = field(repr=False, compare=False)

    @property
    def valid(self) -> bool:
        return self.capped_count == 0

    def records(self):
        for i, (t, c) in enumerate(zip(self.times, self.capped)):
            yield HitRecord(i, int(t), bool(c))

    def summary(self) -> dict:
        edges, counts = self.histogram
        return {
            "trials": self.n_trials,
            "mean": self.mean,
            "variance": self.variance,
            "std_error": self.std_error,
            "quantiles": {f"{k:g}": v for k, v in self.quantiles.items()},
            "histogram": {"bucket_width": self.bucket_width, "edges": list(edges), "counts": list(counts)},
            "capped": self.capped_count,
            "valid": self.valid,
            "step_cap": self.step_cap,
            "master_seed": self.master_seed,
            "generator": self.generator_id,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("trial,T,capped\n")
        for i, (t, c) in enumerate(zip(self.times.tolist(), self.capped.tolist())):
            buf.write(f"{i},{t},{int(c)}\n")
        return buf.getvalue()


def _run_chunk(spec: ProcessSpec, threshold, master: np.uint64, first: int, count: int,
               step_cap: int, out_t: np.ndarray, out_capped: np.ndarray) -> None:
    if spec.family == CHAIN:
        chain = spec.chain
        hit = chain.target if threshold is None else chain.labels <= threshold
        if np.ndim(spec.start) == 0:
            start_index, probs = int(spec.start), np.zeros(1)
        else:
            start_index, probs = -1, np.asarray(spec.start, dtype=float)
        kernels.chain_trials(chain.matrix.indptr.astype(np.int64), chain.matrix.indices.astype(np.int64),
                             chain.matrix.data, np.ascontiguousarray(hit, dtype=np.bool_), start_index, probs,
                             master, first, count, step_cap, out_t, out_capped)
        return
    n = spec.n
    q_n, ratio = mutation_constants(n)
    weights = np.asarray(spec.weights if spec.weights is not None else np.zeros(n), dtype=float)
    uniform = spec.init == "uniform"
    init = np.zeros(n, dtype=np.int8) if uniform else np.asarray(spec.init, dtype=np.int8)
    lo_target = spec.a if spec.a is not None else n
    thr = 0.0 if threshold is None else float(threshold)
    kernels.bitstring_trials(FAMILY_CODE[spec.family], n, weights, spec.optimum_bits(), lo_target, thr,
                             init, uniform, q_n, ratio, master, first, count, step_cap, out_t, out_capped)


def simulate_times(spec: ProcessSpec, a: float | None = None, trials: int = 1000, master_seed: int = 0,
                   step_cap: int | None = None, workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Raw hitting times and capped flags, in trial order."""
    if trials < 1:
        raise DomainError("need at least one trial")
    cap = default_step_cap(spec) if step_cap is None else int(step_cap)
    if cap < 1:
        raise DomainError("step_cap must be >= 1")
    workers = resolve_workers(workers)
    master = np.uint64(int(master_seed) & MASK64)
    out_t = np.zeros(trials, dtype=np.int64)
    out_capped = np.zeros(trials, dtype=np.bool_)
    chunks = [(s, min(CHUNK, trials - s)) for s in range(0, trials, CHUNK)]

    def work(chunk):
        s, c = chunk
        _run_chunk(spec, a, master, s, c, cap, out_t[s:s + c], out_capped[s:s + c])

    if workers == 1 or len(chunks) == 1:
        for ch in chunks:
            work(ch)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, chunks))
    return out_t, out_capped


def summarize(times: np.ndarray, capped: np.ndarray, master_seed: int, step_cap: int,
              bucket_width: float | None = None) -> EmpiricalStats:
    n_trials = int(times.size)
    capped_count = int(np.count_nonzero(capped))
    if capped_count == n_trials:
        raise EstimationError(f"all {n_trials} trials reached the step cap {step_cap}")
    ok = times[~capped].astype(float)
    m = ok.size
    mean = math.fsum(ok) / m
    variance = math.fsum((ok - mean) ** 2) / (m - 1) if m > 1 else 0.0
    std_error = math.sqrt(variance / m)
    qs = np.quantile(times.astype(float), QUANTILE_LEVELS, method="inverted_cdf")
    quantiles = {lvl: float(q) for lvl, q in zip(QUANTILE_LEVELS, qs)}
    hi = int(times.max())
    if bucket_width is None:
        bucket_width = float(max(1, math.ceil((hi + 1) / 50)))
    nb = max(1, math.ceil((hi + 1) / bucket_width))
    edges = tuple(float(i * bucket_width) for i in range(nb + 1))
    counts = tuple(int(c) for c in np.histogram(times, bins=np.array(edges))[0])
    return EmpiricalStats(n_trials, mean, variance, std_error, quantiles, (edges, counts), float(bucket_width),
                          capped_count, int(master_seed), GENERATOR_ID, int(step_cap), times, capped)


def run_trials(spec: ProcessSpec, a: float | None = None, trials: int = 1000, master_seed: int = 0,
               step_cap: int | None = None, workers: int | None = None,
               bucket_width: float | None = None) -> EmpiricalStats:
    """Simulate ``trials`` independent runs and summarise the hitting time.

    Parameters
    ----------
    spec : ProcessSpec
    a : float, optional
        Distance threshold; ``T`` is the first step with distance ``<= a``.
        Defaults to 0 for bit strings and to the chain's own target set.
    trials, master_seed, step_cap
        Trial ``i`` uses the stream of ``(master_seed, i)``.
    workers : int, optional
        Thread count; falls back to ``DRIFTKIT_WORKERS``, then 1.  It never
        changes the result.

    Raises
    ------
    EstimationError
        If every trial was capped.
    """
    cap = default_step_cap(spec) if step_cap is None else int(step_cap)
    times, capped = simulate_times(spec, a, trials, master_seed, cap, workers)
    return summarize(times, capped, master_seed, cap, bucket_width)


# tail estimates --------------------------------------------------------------

@dataclass(frozen=True)
class TailEstimate:
    fraction: float
    low: float
    high: float
    count: int
    trials: int
    confidence: float

    @property
    def width(self) -> float:
        return self.high - self.low


def wilson_interval(count: int, trials: int, confidence: float) -> tuple[float, float]:
    if trials <= 0:
        raise DomainError("trials must be positive")
    z = norm.ppf(0.5 + confidence / 2)
    p = count / trials
    z2n = z * z / trials
    centre = (p + z2n / 2) / (1 + z2n)
    half = z / (1 + z2n) * math.sqrt(p * (1 - p) / trials + z2n / (4 * trials))
    return max(0.0, centre - half), min(1.0, centre + half)


def _count_at_least(stats: EmpiricalStats, t: float) -> int:
    # capped runs only tell us T >= cap, so they count as exceeding any t
    return int(np.count_nonzero((stats.times >= t) | stats.capped))


def empirical_tail(stats: EmpiricalStats, t: float, confidence: float = 0.99) -> TailEstimate:
    """Fraction of trials with ``T >= t`` and its Wilson interval."""
    if t < 0:
        raise DomainError("t must be non-negative")
    k = _count_at_least(stats, t)
    lo, hi = wilson_interval(k, stats.n_trials, confidence)
    return TailEstimate(k / stats.n_trials, lo, hi, k, stats.n_trials, confidence)


def empirical_lower_tail(stats: EmpiricalStats, t: float, confidence: float = 0.99) -> TailEstimate:
    """Fraction of trials with ``T < t`` and its Wilson interval."""
    k = stats.n_trials - _count_at_least(stats, t)
    lo, hi = wilson_interval(k, stats.n_trials, confidence)
    return TailEstimate(k / stats.n_trials, lo, hi, k, stats.n_trials, confidence)


CONSISTENT = "consistent"
VIOLATION = "violation"
INCONCLUSIVE = "inconclusive"
VERDICT_CONFIDENCE = 0.999


@dataclass(frozen=True)
class ClaimRecord:
    claim_id: str
    side: str
    t: float
    bound: float
    fraction: float
    low: float
    high: float
    verdict: str
    oracle: float | None = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ConcentrationReport:
    records: tuple

    @property
    def violations(self) -> int:
        return sum(r.verdict == VIOLATION for r in self.records)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {"passed": self.passed, "violations": self.violations,
                "claims": [r.as_dict() for r in self.records]}


def concentration_check(stats: EmpiricalStats, predictions, oracle=None) -> ConcentrationReport:
    """Compare claimed tail bounds with the simulated distribution.

    ``predictions`` holds ``(t, bound, side)`` or ``(claim_id, t, bound, side)``
    tuples, ``side`` being ``"upper"`` for ``P(T >= t) <= bound`` and
    ``"lower"`` for ``P(T < t) <= bound``.  A claim is a violation only
    when the bound lies below the whole 99.9% Wilson interval.
    """
    records = []
    for k, pred in enumerate(predictions):
        if len(pred) == 4:
            claim_id, t, bound, side = pred
        else:
            t, bound, side = pred
            claim_id = f"claim-{k}"
        if side == "upper":
            est = empirical_tail(stats, t, VERDICT_CONFIDENCE)
        elif side == "lower":
            est = empirical_lower_tail(stats, t, VERDICT_CONFIDENCE)
        else:
            raise DomainError(f"side must be 'upper' or 'lower', got {side!r}")
        if bound >= 1.0:
            verdict = CONSISTENT
        elif bound < est.low:
            verdict = VIOLATION
        elif est.fraction <= bound:
            verdict = CONSISTENT
        else:
            verdict = INCONCLUSIVE
        ora = None if oracle is None else oracle[k]
        records.append(ClaimRecord(str(claim_id), side, float(t), float(bound), est.fraction, est.low,
                                   est.high, verdict, ora))
    return ConcentrationReport(tuple(records))

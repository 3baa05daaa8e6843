"""Named end-to-end claim suites run by ``driftkit verify``.

Each suite returns a :class:`SuiteReport`; a claim fails only on a
definite contradiction (an exact value outside its bracket, or a tail
bound lying below the whole 99.9% Wilson interval of the simulation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .montecarlo import VIOLATION, concentration_check, run_trials
from .oracle import (build_leadingones_chain, build_onemax_chain, exact_drift_profile, exact_expectation,
                     exact_tail, leadingones_suffix_drift, onemax_binomial_start, uniform_start)
from .processes import (ProcessSpec, leadingones_exact_drift, leadingones_expected, leadingones_tail_predictions,
                        onemax_drift_bounds, onemax_expected_bounds, onemax_tail_predictions)
from .sweep import soundness_sweep

SUITES = ("onemax-expectation", "onemax-tails", "leadingones-expectation", "leadingones-tails", "soundness-sweep")


@dataclass(frozen=True)
class Claim:
    claim_id: str
    passed: bool
    detail: dict

    def as_dict(self) -> dict:
        return {"claim": self.claim_id, "passed": self.passed, **self.detail}


@dataclass
class SuiteReport:
    suite: str
    params: dict
    claims: list = field(default_factory=list)
    concentration: object = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(c.passed for c in self.claims)
        if self.concentration is not None:
            ok = ok and self.concentration.passed
        return ok

    def as_dict(self) -> dict:
        out = {"suite": self.suite, "params": self.params, "passed": self.passed,
               "claims": [c.as_dict() for c in self.claims]}
        if self.concentration is not None:
            out["concentration"] = self.concentration.as_dict()
        if self.extra:
            out["extra"] = self.extra
        return out


def onemax_expectation(n: int = 1000, slack_factor: float = 50.0) -> SuiteReport:
    """Exact ``E[T]`` from a uniform start against the leading-order bracket,
    widened by ``slack_factor * ln n``; for ``n <= 200`` also the drift
    sandwich at every state."""
    chain = build_onemax_chain(n)
    exact = exact_expectation(chain, onemax_binomial_start(n))
    lo, hi = onemax_expected_bounds(n)
    slack = slack_factor * math.log(n)
    rep = SuiteReport("onemax-expectation", {"n": n, "slack": slack})
    rep.claims.append(Claim("expectation-bracket", lo - slack <= exact <= hi + slack,
                            {"exact": exact, "lower": lo - slack, "upper": hi + slack}))
    if n <= 200:
        drift = exact_drift_profile(chain).drift
        worst = None
        for x in range(1, n + 1):
            low, up = onemax_drift_bounds(n, x)
            if not low * (1 - 1e-12) <= drift[x] <= up * (1 + 1e-12):
                worst = x
                break
        rep.claims.append(Claim("drift-sandwich", worst is None, {"first_violation": worst}))
    return rep


def onemax_tails(n: int = 100, trials: int = 100_000, seed: int = 1, workers: int | None = None,
                 r_values=(1, 2, 3), c_lower: float = 6.0) -> SuiteReport:
    """Simulated tails of OneMax against ``e^{-r}`` at ``en(ln n + r)`` and
    ``e^{-r/2}`` below ``en ln n - c n - r e n``; mean against the oracle."""
    chain = build_onemax_chain(n)
    start = onemax_binomial_start(n)
    exact = exact_expectation(chain, start)
    stats = run_trials(ProcessSpec.onemax(n), trials=trials, master_seed=seed, workers=workers)
    rep = SuiteReport("onemax-tails", {"n": n, "trials": trials, "seed": seed, "r": list(r_values),
                                       "c_lower": c_lower})
    within = abs(stats.mean - exact) <= 4 * stats.std_error
    rep.claims.append(Claim("mean-vs-oracle", within and stats.valid,
                            {"empirical": stats.mean, "std_error": stats.std_error, "exact": exact,
                             "capped": stats.capped_count}))
    preds, oracle = [], []
    horizon = int(math.ceil(math.e * n * (math.log(n) + max(r_values) + 1)))
    curve = exact_tail(chain, start, horizon)
    for r in r_values:
        t_up = math.ceil(math.e * n * (math.log(n) + r))
        preds.append((f"upper-r{r:g}", t_up, math.exp(-r), "upper"))
        oracle.append(curve.at_least(t_up))
        pred = onemax_tail_predictions(n, r, c_lower)
        t_lo = max(0.0, pred.lower_t)
        preds.append((f"lower-r{r:g}", t_lo, pred.lower_prob, "lower"))
        oracle.append(curve.less_than(t_lo))
    rep.concentration = concentration_check(stats, preds, oracle)
    rep.extra["summary"] = stats.summary()
    return rep


def leadingones_expectation(n: int = 8) -> SuiteReport:
    """Full-chain oracle against the closed form, plus the drift formula
    against exhaustive suffix enumeration for every ``(a, i)``."""
    chain = build_leadingones_chain(n)
    exact = exact_expectation(chain, uniform_start(chain))
    closed = leadingones_expected(n, n)
    rep = SuiteReport("leadingones-expectation", {"n": n})
    rep.claims.append(Claim("closed-form", abs(exact - closed) <= 1e-9 * max(1.0, closed),
                            {"exact": exact, "closed_form": closed, "difference": exact - closed}))
    worst = 0.0
    for a in range(1, n + 1):
        for i in range(1, a + 1):
            worst = max(worst, abs(leadingones_suffix_drift(n, a, i) - leadingones_exact_drift(n, a, i)))
    rep.claims.append(Claim("drift-formula", worst <= 1e-12, {"max_abs_difference": worst}))
    return rep


def leadingones_tails(n: int = 100, a: int = 90, trials: int = 100_000, seed: int = 1,
                      workers: int | None = None, r: float | None = None) -> SuiteReport:
    """Simulated ``T(a)`` against the stated thresholds at ``r = 2 n^{3/2}``
    with failure probability ``exp(-C r n^{-3/2})``, and against the
    thresholds carried by the explicit derivation."""
    r = 2 * n ** 1.5 if r is None else r
    pred = leadingones_tail_predictions(n, a, r)
    stats = run_trials(ProcessSpec.leadingones(n, a), trials=trials, master_seed=seed, workers=workers)
    rep = SuiteReport("leadingones-tails", {"n": n, "a": a, "r": r, "trials": trials, "seed": seed})
    claims = []
    if not math.isnan(pred.upper_t):
        claims.append(("upper-stated", pred.upper_t, pred.upper_prob, "upper"))
        claims.append(("upper-explicit", pred.extra["explicit_upper_t"], pred.upper_prob, "upper"))
    if not math.isnan(pred.lower_t):
        claims.append(("lower-stated", max(0.0, pred.lower_t), pred.lower_prob, "lower"))
        claims.append(("lower-explicit", max(0.0, pred.extra["explicit_lower_t"]), pred.lower_prob, "lower"))
    if not math.isnan(pred.upper_t):
        claims.append(("upper-rederived-constant", pred.upper_t, pred.extra["prob_rederived"], "upper"))
    rep.concentration = concentration_check(stats, claims)
    expected = leadingones_expected(n, a)
    rep.claims.append(Claim("mean-vs-closed-form", abs(stats.mean - expected) <= 4 * stats.std_error and stats.valid,
                            {"empirical": stats.mean, "std_error": stats.std_error, "closed_form": expected}))
    rep.extra["summary"] = stats.summary()
    rep.extra["C"] = pred.extra["C"]
    rep.extra["C_rederived"] = pred.extra["C_rederived"]
    return rep


def sweep_suite(chains: int = 50, seed: int = 7, max_states: int = 40) -> SuiteReport:
    report = soundness_sweep(chains, seed, max_states)
    rep = SuiteReport("soundness-sweep", {"chains": chains, "seed": seed, "max_states": max_states})
    rep.claims.append(Claim("zero-violations", report.passed, report.as_dict()))
    return rep


def run_suite(name: str, n: int | None = None, a: int | None = None, trials: int | None = None,
              seed: int | None = None, workers: int | None = None, chains: int | None = None,
              c_lower: float | None = None) -> SuiteReport:
    """Dispatch by suite name; unset arguments take each suite's defaults."""
    def pick(**kw):
        return {k: v for k, v in kw.items() if v is not None}

    if name == "onemax-expectation":
        return onemax_expectation(**pick(n=n))
    if name == "onemax-tails":
        return onemax_tails(**pick(n=n, trials=trials, seed=seed, c_lower=c_lower), workers=workers)
    if name == "leadingones-expectation":
        return leadingones_expectation(**pick(n=n))
    if name == "leadingones-tails":
        return leadingones_tails(**pick(n=n, a=a, trials=trials, seed=seed), workers=workers)
    if name == "soundness-sweep":
        return sweep_suite(**pick(chains=chains, seed=seed))
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")


def has_violation(report: SuiteReport) -> bool:
    conc = report.concentration
    return not report.passed or (conc is not None and any(r.verdict == VIOLATION for r in conc.records))


__all__ = ["SUITES", "Claim", "SuiteReport", "run_suite", "has_violation", "onemax_expectation", "onemax_tails",
           "leadingones_expectation", "leadingones_tails", "sweep_suite"]

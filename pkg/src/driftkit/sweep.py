"""Random absorbing chains and the bound-soundness sweep.

Every chain has one target state labelled 0 and distinct positive integer
labels elsewhere.  For each chain the sweep fits the parameters of every
applicable statement from the exact transition matrix, runs it in
verified mode (so preconditions are checked state by state) and compares
the result against the exact expectation or the exact survival curve.
A statement whose preconditions fail on a chain is skipped, not counted.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import tails, theorems
from .errors import DomainError, PreconditionError, StateSpaceError
from .oracle import MarkovChain, exact_drift_profile, exact_expectation, exact_tail
from .potential import HSpec, build_potential

KINDS = ("monotone", "biased", "walk")
NOISE = 1e-9  # relative allowance for floating-point noise in the exact solves
N_HORIZONS = 10


def random_chain(rng: np.random.Generator, max_states: int = 40, kind: str | None = None) -> MarkovChain:
    """Random absorbing chain with at most ``max_states`` states.

    ``kind`` is ``"monotone"`` (never moves up), ``"biased"`` (arbitrary
    moves, weighted downwards) or ``"walk"`` (nearest-neighbour moves);
    drawn at random when omitted.  Every non-target state has a
    positive-probability move to a lower label, so the target is reachable.
    """
    if max_states < 2:
        raise DomainError("need at least 2 states")
    kind = kind or KINDS[int(rng.integers(len(KINDS)))]
    if kind not in KINDS:
        raise DomainError(f"unknown chain kind {kind!r}")
    m = int(rng.integers(2, max_states + 1))
    spread = int(rng.integers(m - 1, 3 * m))
    labels = np.concatenate([[0.0], np.sort(rng.choice(np.arange(1, spread + 1), m - 1, replace=False))])
    rows: list[dict] = [{0: 1.0}]
    for i in range(1, m):
        if kind == "walk":
            down = rng.uniform(0.3, 0.9)
            up = rng.uniform(0, 1 - down) if i < m - 1 else 0.0
            row = {i - 1: down}
            if up > 0:
                row[i + 1] = up
            stay = 1 - down - up
            if stay > 0:
                row[i] = stay
        else:
            pool = np.arange(i + 1) if kind == "monotone" else np.arange(m)
            k = int(rng.integers(1, min(len(pool), 5) + 1))
            succ = set(rng.choice(pool, k, replace=False).tolist())
            succ.add(int(rng.integers(i)))  # guarantees a downward move
            succ = sorted(succ)
            weights = rng.dirichlet(np.ones(len(succ)))
            if kind == "biased":
                weights = weights * np.where(np.array(succ) <= i, 1.0, 0.3)
                weights = weights / weights.sum()
            row = {}
            for j, w in zip(succ, weights):
                row[j] = row.get(j, 0.0) + float(w)
        total = math.fsum(row.values())
        row = {j: p / total for j, p in row.items()}
        # rounding goes into the largest entry so the row sums to 1
        big = max(row, key=row.get)
        row[big] += 1.0 - math.fsum(row.values())
        rows.append(row)
    return MarkovChain.from_rows(labels, rows)


def corpus(count: int, seed: int, max_states: int = 40) -> list[MarkovChain]:
    rng = np.random.default_rng(seed)
    return [random_chain(rng, max_states) for _ in range(count)]


# sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    chain: int
    statement: str
    kind: str  # "upper", "lower", "upper-tail", "lower-tail"
    bound: float
    exact: float
    horizon: float | None = None

    @property
    def violated(self) -> bool:
        slack = NOISE * max(1.0, abs(self.exact))
        if self.kind in ("upper", "upper-tail", "lower-tail"):
            return self.bound < self.exact - slack
        return self.bound > self.exact + slack

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["violated"] = self.violated
        return d


@dataclass
class SweepReport:
    chains: int = 0
    checks: list = field(default_factory=list)
    skipped: Counter = field(default_factory=Counter)

    @property
    def violations(self) -> list:
        return [c for c in self.checks if c.violated]

    @property
    def passed(self) -> bool:
        return not self.violations

    def statements(self) -> Counter:
        return Counter(c.statement for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "chains": self.chains,
            "checks": len(self.checks),
            "violations": [c.as_dict() for c in self.violations],
            "checks_per_statement": dict(sorted(self.statements().items())),
            "skipped": dict(sorted(self.skipped.items())),
        }


def _table(chain: MarkovChain, values_by_label: dict, fill: float) -> HSpec:
    """Integer table covering 1..max label; keys between labels take the next label's value."""
    top = int(chain.labels.max())
    table, pending = {}, []
    for k in range(1, top + 1):
        if k in values_by_label:
            for q in pending:
                table[q] = values_by_label[k]
            pending = []
            table[k] = values_by_label[k]
        else:
            pending.append(k)
    for q in pending:
        table[q] = fill
    return HSpec.from_table(table, x_min=1, x_max=top)


def _horizons(curve) -> list[int]:
    t_end = max(2, len(curve.values) - 1)
    return sorted({int(round(v)) for v in np.geomspace(1, t_end, N_HORIZONS)})


def _attempt(report: SweepReport, name: str, fn):
    try:
        return fn()
    except (PreconditionError, DomainError, StateSpaceError) as exc:
        report.skipped[f"{name}: {type(exc).__name__}"] += 1
        return None


def _sweep_chain(idx: int, chain: MarkovChain, report: SweepReport) -> None:
    live = np.flatnonzero(~chain.target)
    start = int(live[np.argmax(chain.labels[live])])
    x0 = float(chain.labels[start])
    exact = exact_expectation(chain, start)
    prof = exact_drift_profile(chain)
    drift = {int(chain.labels[i]): float(prof.drift[i]) for i in live}
    positive = min(drift.values()) > 0
    top = int(chain.labels.max())

    def expect(res, name):
        if res is not None:
            report.checks.append(Check(idx, name, res.direction, res.bound, exact))

    # additive
    lo_d, hi_d = theorems.fit_additive(chain)
    if lo_d > 0:
        expect(_attempt(report, "additive-upper", lambda: theorems.additive_upper(lo_d, x0, chain)), "additive-upper")
    if hi_d > 0:
        expect(_attempt(report, "additive-lower", lambda: theorems.additive_lower(hi_d, x0, chain)), "additive-lower")

    eps = min([v for v in drift.values() if v > 0] or [1.0])
    # general theorem with h equal to the exact drift (upper) or its positive part (lower)
    if positive:
        h_up = _table(chain, drift, eps)
        g_up = build_potential(h_up)
        alpha = theorems.fit_alpha(chain, g_up, theorems.UPPER)
        if alpha > 0:
            expect(_attempt(report, "general-upper",
                            lambda: theorems.general_expected_bound(g_up, alpha, x0, theorems.UPPER, chain)),
                   "general-upper")
        # variable drift with the running minimum, which is increasing
        mono = {k: min(v for kk, v in drift.items() if kk >= k) for k in drift}
        h_mono = _table(chain, mono, eps)
        expect(_attempt(report, "variable-upper", lambda: theorems.variable_upper(h_mono, x0, chain)),
               "variable-upper")
        c = _attempt(report, "nonmonotone-c", lambda: theorems.minimal_nonmonotone_c(h_up, chain))
        if c is not None:
            expect(_attempt(report, "nonmonotone-upper",
                            lambda: theorems.nonmonotone_variable_upper(h_up, c, x0, chain)), "nonmonotone-upper")
        mult = theorems.fit_multiplicative(chain, theorems.UPPER)
        if 0 < mult < 1:
            expect(_attempt(report, "multiplicative-upper",
                            lambda: theorems.multiplicative_upper(mult, 1.0, x0, chain)), "multiplicative-upper")
    h_low = _table(chain, {k: max(v, eps) for k, v in drift.items()}, eps)
    g_low = build_potential(h_low)
    alpha_l = theorems.fit_alpha(chain, g_low, theorems.LOWER)
    if alpha_l > 0:
        expect(_attempt(report, "general-lower",
                        lambda: theorems.general_expected_bound(g_low, alpha_l, x0, theorems.LOWER, chain)),
               "general-lower")

    if chain.is_monotone:
        _monotone_statements(idx, chain, report, start, x0, exact, drift, eps, expect)

    _tail_statements(idx, chain, report, start, x0, drift, eps, positive, top)


def _monotone_statements(idx, chain, report, start, x0, exact, drift, eps, expect):
    live = np.flatnonzero(~chain.target)
    # c(x): lowest reachable label from any state at or above x, which is increasing in x
    lowest = {}
    for i in live:
        cols, vals = chain.row(int(i))
        lowest[float(chain.labels[i])] = float(chain.labels[cols[vals > 0]].min())
    keys = sorted(lowest)
    c_vals = {x: min(lowest[y] for y in keys if y >= x) for x in keys}
    top = int(max(keys))
    table = {}
    for k in range(1, top + 1):
        cand = [drift[int(x)] for x in keys if c_vals[x] <= k]
        table[k] = max(cand + [eps])
    # keep it increasing after the eps floor
    run = 0.0
    for k in range(1, top + 1):
        run = max(run, table[k])
        table[k] = run
    h_jump = HSpec.from_table(table, x_min=1, x_max=top)
    expect(_attempt(report, "variable-lower",
                    lambda: theorems.variable_lower(h_jump, lambda x: c_vals[float(x)], x0, chain)), "variable-lower")

    mult = theorems.fit_multiplicative(chain, theorems.LOWER)
    if 0 < mult <= 1:
        beta = _attempt(report, "multiplicative-lower-beta",
                        lambda: theorems.fit_multiplicative_lower_beta(chain, mult, 1.0))
        if beta is not None:
            expect(_attempt(report, "multiplicative-lower",
                            lambda: theorems.multiplicative_lower(mult, beta, 1.0, x0, chain)),
                   "multiplicative-lower")

    part = _attempt(report, "fitness-partition", lambda: theorems.partition_from_chain(chain, start))
    if part is not None:
        order = np.argsort(-chain.labels, kind="stable")
        level = int(np.flatnonzero(order == start)[0]) + part.first_level
        expect(_attempt(report, "fitness-levels-upper", lambda: theorems.fitness_levels_upper(part, level)),
               "fitness-levels-upper")
        expect(_attempt(report, "fitness-levels-lower", lambda: theorems.fitness_levels_lower(part)),
               "fitness-levels-lower")


def _tail_statements(idx, chain, report, start, x0, drift, eps, positive, top):
    curve = exact_tail(chain, start, _tail_length(chain, start))
    horizons = _horizons(curve)

    def tail_check(name, make, upper: bool):
        for t in horizons:
            res = _attempt(report, name, lambda: make(t))
            if res is None:
                return
            exact = curve.at_least(t) if upper else curve.less_than(t)
            report.checks.append(Check(idx, name, res.direction, res.bound, exact, float(t)))

    if positive:
        h_up = _table(chain, drift, eps)
        g_up = build_potential(h_up)
        lam_g = 0.5 / max(1.0, _max_g_jump(chain, g_up))
        tail_check("general-tail-upper",
                   lambda t: tails.general_tail_upper(g_up, tails.TailParams(lam_g, "oracle", 0.0, t), x0,
                                                      chain=chain, start=start), True)
        # a mid threshold exercises overshoot below a
        mids = [x for x in sorted(set(chain.labels[chain.labels > 0])) if x < x0]
        if mids:
            a = float(mids[len(mids) // 2])
            sub = chain.with_target(a)
            sub_curve = exact_tail(sub, start, _tail_length(sub, start))
            for t in _horizons(sub_curve):
                res = _attempt(report, "general-tail-upper-a", lambda: tails.general_tail_upper(
                    g_up, tails.TailParams(lam_g, "oracle", a, t), x0, chain=chain, start=start))
                if res is None:
                    break
                report.checks.append(Check(idx, "general-tail-upper-a", res.direction, res.bound,
                                           sub_curve.at_least(t), float(t)))
        slope = min(drift[k] / k for k in drift)
        h_lin = HSpec.expression(f"{slope!r}*x", 1.0, float(top))
        tail_check("derivative-tail-upper", lambda t: tails.corollary_bounds(h_lin, 0.999 * slope, x0, t, "upper", chain), True)
        mult = theorems.fit_multiplicative(chain, theorems.UPPER)
        if 0 < mult < 1 and _attempt(report, "multiplicative-tail",
                                     lambda: theorems.multiplicative_upper(mult, 1.0, x0, chain)) is not None:
            tail_check("multiplicative-tail", lambda t: tails.multiplicative_tail(mult, 1.0, x0, t), True)

    h_low = _table(chain, {k: max(v, eps) for k, v in drift.items()}, eps)
    g_low = build_potential(h_low)
    lam_l = 0.5 / max(1.0, _max_g_jump(chain, g_low))
    absorbing = True
    tail_check("general-tail-lower",
               lambda t: tails.general_tail_lower(g_low, tails.TailParams(lam_l, "oracle", 0.0, t, absorbing), x0,
                                                  chain=chain, start=start), False)
    tail_check("general-tail-lower-sum",
               lambda t: tails.general_tail_lower(g_low, tails.TailParams(lam_l, "oracle", 0.0, t, False), x0,
                                                  chain=chain, start=start), False)
    # decreasing h for the second corollary statement
    steep = 0.5 / top
    intercept = max(drift[k] + steep * k for k in drift) + steep
    h_dec = HSpec.expression(f"{intercept!r}-{steep!r}*x", 1.0, float(top))
    tail_check("derivative-tail-lower", lambda t: tails.corollary_bounds(h_dec, 0.999 * steep, x0, t, "lower", chain), False)


def _max_g_jump(chain: MarkovChain, g) -> float:
    prof = exact_drift_profile(chain, g)
    gv = prof.g_values
    best = 0.0
    for i in np.flatnonzero(~chain.target):
        cols, vals = chain.row(int(i))
        best = max(best, float(np.max(np.abs(gv[i] - gv[cols[vals > 0]]))))
    return best


def _tail_length(chain: MarkovChain, start, mass: float = 1e-9, cap: int = 200_000) -> int:
    """Horizon where the survival probability drops below ``mass`` (capped)."""
    length = 64
    while length < cap:
        curve = exact_tail(chain, start, length)
        if curve.at_least(length) < mass:
            return length
        length *= 2
    return cap


def soundness_sweep(count: int = 50, seed: int = 7, max_states: int = 40) -> SweepReport:
    """Run every applicable verified statement on ``count`` random chains."""
    report = SweepReport()
    for idx, chain in enumerate(corpus(count, seed, max_states)):
        _sweep_chain(idx, chain, report)
        report.chains += 1
    return report

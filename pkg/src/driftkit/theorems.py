"""Expected hitting-time bounds from drift conditions.

Every function returns a :class:`BoundResult`.  When a finite
:class:`~driftkit.oracle.MarkovChain` is passed, the drift conditions are
checked exactly state by state and a failure raises
:class:`~driftkit.errors.PreconditionError` carrying the offending state;
the result is then tagged ``"verified-by-oracle"``.  Without a chain the
conditions are the caller's responsibility and the result says
``"asserted-by-user"``.

Chains used for verification must have their targets at label 0 and all
other labels inside ``[x_min, x_max]`` of the drift function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError
from .oracle import DriftProfile, MarkovChain, exact_drift_profile
from .potential import HSpec, PotentialFunction, build_potential

UPPER = "upper"
LOWER = "lower"
VERIFIED = "verified-by-oracle"
ASSERTED = "asserted-by-user"
RTOL = 1e-12


@dataclass(frozen=True)
class BoundResult:
    """A bound on ``E[T]`` and how it was obtained."""

    bound: float
    direction: str
    theorem: str
    params: dict
    precondition_status: str
    notes: tuple = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction not in (UPPER, LOWER):
            raise ValueError(f"direction must be upper or lower, got {self.direction!r}")
        if not self.bound >= 0:
            raise ValueError(f"bound must be non-negative, got {self.bound!r}")

    def as_dict(self) -> dict:
        return {
            "bound": self.bound,
            "direction": self.direction,
            "theorem": self.theorem,
            "params": self.params,
            "precondition_status": self.precondition_status,
            "notes": list(self.notes),
            **({"extra": self.extra} if self.extra else {}),
        }


def _status(chain) -> str:
    return ASSERTED if chain is None else VERIFIED


def _slack(ref: float) -> float:
    return RTOL * max(1.0, abs(ref))


def _fail_at(chain: MarkovChain, i: int, what: str):
    label = float(chain.labels[i])
    raise PreconditionError(f"{what} at state {i} (label {label:g})", witness={"state": int(i), "label": label})


def _check_layout(chain: MarkovChain, x_min: float, x_max: float = math.inf) -> np.ndarray:
    """Targets must be exactly the label-0 states and other labels in the domain.

    Returns the indices of the non-target states.
    """
    zero = chain.labels == 0
    if not np.array_equal(zero, chain.target):
        i = int(np.flatnonzero(zero != chain.target)[0])
        _fail_at(chain, i, "target set must be exactly the states labelled 0")
    live = np.flatnonzero(~chain.target)
    lab = chain.labels[live]
    bad = (lab < x_min - _slack(x_min)) | (lab > x_max + _slack(x_max))
    if np.any(bad):
        _fail_at(chain, int(live[np.flatnonzero(bad)[0]]),
                 f"label outside {{0}} u [{x_min:g}, {x_max:g}]")
    return live


def _first_violation(values: np.ndarray, limit: np.ndarray, live: np.ndarray, at_least: bool):
    if at_least:
        bad = values[live] < limit - RTOL * np.maximum(1.0, np.abs(limit))
    else:
        bad = values[live] > limit + RTOL * np.maximum(1.0, np.abs(limit))
    hits = np.flatnonzero(bad)
    return None if hits.size == 0 else int(live[hits[0]])


def _h_on_labels(h: HSpec, labels: np.ndarray) -> np.ndarray:
    return np.array([h(x) for x in labels])


def _check_drift_vs_h(chain, profile: DriftProfile, h: HSpec, live, at_least: bool) -> None:
    hv = _h_on_labels(h, chain.labels[live])
    i = _first_violation(profile.drift, hv, live, at_least)
    if i is not None:
        rel = ">=" if at_least else "<="
        _fail_at(chain, i, f"drift {profile.drift[i]:.6g} violates drift {rel} h(x) = {h(chain.labels[i]):.6g}")


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return value


# additive ----------------------------------------------------------------

def _additive(delta: float, x0: float, chain, direction: str) -> BoundResult:
    delta = _positive("delta", delta)
    x0 = float(x0)
    if x0 < 0:
        raise DomainError("X0 must be non-negative")
    if chain is not None:
        if np.any(chain.labels < 0):
            _fail_at(chain, int(np.flatnonzero(chain.labels < 0)[0]), "negative label")
        live = _check_layout(chain, 0.0)
        prof = exact_drift_profile(chain)
        i = _first_violation(prof.drift, np.full(live.size, delta), live, direction == UPPER)
        if i is not None:
            rel = ">=" if direction == UPPER else "<="
            _fail_at(chain, i, f"drift {prof.drift[i]:.6g} violates drift {rel} {delta:g}")
    key = "delta_u" if direction == UPPER else "delta_l"
    return BoundResult(x0 / delta, direction, f"additive-{direction}", {key: delta, "X0": x0}, _status(chain))


def additive_upper(delta_u: float, x0: float, chain: MarkovChain | None = None) -> BoundResult:
    """``E[T_0] <= X0 / delta_u`` when the drift is at least ``delta_u``."""
    return _additive(delta_u, x0, chain, UPPER)


def additive_lower(delta_l: float, x0: float, chain: MarkovChain | None = None) -> BoundResult:
    """``E[T_0] >= X0 / delta_l`` when the drift is at most ``delta_l``."""
    return _additive(delta_l, x0, chain, LOWER)


def fit_additive(chain: MarkovChain) -> tuple[float, float]:
    """Smallest and largest exact drift over non-target states."""
    prof = exact_drift_profile(chain)
    d = prof.drift[~chain.target]
    return float(d.min()), float(d.max())


# general drift theorem ------------------------------------------------------

def _g_at(g: PotentialFunction, x0: float) -> float:
    return g(float(x0))


def general_expected_bound(g: PotentialFunction, alpha: float, x0: float, direction: str = UPPER,
                           chain: MarkovChain | None = None) -> BoundResult:
    """``E[T_0] <= g(X0)/alpha_u`` (upper) or ``>= g(X0)/alpha_l`` (lower).

    Verified mode checks, at every non-target state, drift against
    ``h(x)`` and the exact g-drift against ``alpha``.
    """
    alpha = _positive("alpha", alpha)
    if direction not in (UPPER, LOWER):
        raise DomainError("direction must be 'upper' or 'lower'")
    g0 = _g_at(g, x0)
    if chain is not None:
        live = _check_layout(chain, g.x_min, g.x_max)
        prof = exact_drift_profile(chain, g)
        at_least = direction == UPPER
        _check_drift_vs_h(chain, prof, g.h, live, at_least)
        i = _first_violation(prof.g_drift, np.full(live.size, alpha), live, at_least)
        if i is not None:
            _fail_at(chain, i, f"g-drift {prof.g_drift[i]:.6g} violates the bound alpha = {alpha:g}")
    key = "alpha_u" if direction == UPPER else "alpha_l"
    return BoundResult(g0 / alpha, direction, f"general-{direction}", {key: alpha, "X0": float(x0), "g_X0": g0},
                       _status(chain))


def fit_alpha(chain: MarkovChain, g: PotentialFunction, direction: str = UPPER) -> float:
    """Exact ``min`` (upper) or ``max`` (lower) g-drift over non-target states."""
    prof = exact_drift_profile(chain, g)
    gd = prof.g_drift[~chain.target]
    return float(gd.min() if direction == UPPER else gd.max())


# variable drift ---------------------------------------------------------

def _require_monotone(h: HSpec, assume_monotone: bool) -> list:
    if assume_monotone:
        return ["monotonicity of h asserted by caller"]
    pair = h.monotone_witness()
    if pair is not None:
        x, y = pair
        raise PreconditionError(f"h is not monotone increasing: h({x:g}) = {h(x):.6g} > h({y:g}) = {h(y):.6g}",
                                witness={"x": x, "y": y})
    if h.kind in ("expression", "table"):
        return ["monotonicity of h checked on a sample grid only"]
    return []


def variable_upper(h: HSpec, x0: float, chain: MarkovChain | None = None,
                   assume_monotone: bool = False) -> BoundResult:
    """``E[T_0] <= x_min/h(x_min) + int_{x_min}^{X0} 1/h`` for increasing h.

    Examples
    --------
    >>> variable_upper(HSpec.constant(0.5, x_min=1.0), 10.0).bound
    20.0
    """
    notes = _require_monotone(h, assume_monotone)
    g = build_potential(h)
    if chain is not None:
        live = _check_layout(chain, h.x_min, h.x_max)
        _check_drift_vs_h(chain, exact_drift_profile(chain), h, live, True)
    return BoundResult(_g_at(g, x0), UPPER, "variable-upper", {"h": h.describe(), "X0": float(x0)},
                       _status(chain), tuple(notes))


# fitness levels -------------------------------------------------------------

@dataclass(frozen=True)
class FitnessPartition:
    """Fitness levels ``first_level .. first_level + m - 1``; the last is the target.

    Parameters
    ----------
    m : int
        Number of levels, at least 2.
    p : sequence of float, optional
        Lower bounds on the probability of leaving each non-final level
        upwards (for upper bounds).
    u, gamma, chi, start : optional
        Upper bounds ``u_i``, transition weights ``gamma[i][j]`` (row ``i``
        for level ``i``, column ``j`` for level ``j``, both relative to
        ``first_level``), the constant ``chi`` and the start distribution over
        the ``m - 1`` non-final levels (for lower bounds).
    """

    m: int
    p: tuple | None = None
    u: tuple | None = None
    gamma: np.ndarray | None = field(default=None, compare=False)
    chi: float = 0.0
    start: tuple | None = None
    first_level: int = 1

    def __post_init__(self):
        if int(self.m) < 2:
            raise DomainError("a partition needs at least 2 levels")
        object.__setattr__(self, "m", int(self.m))
        k = self.m - 1
        if self.p is not None:
            p = tuple(float(v) for v in self.p)
            if len(p) != k:
                raise DomainError(f"need {k} values of p, got {len(p)}")
            for i, v in enumerate(p):
                if not 0 < v <= 1:
                    raise DomainError(f"p for level {i + self.first_level} must lie in (0, 1], got {v!r}")
            object.__setattr__(self, "p", p)
        if self.u is not None:
            u = tuple(float(v) for v in self.u)
            if len(u) != k or any(not v > 0 for v in u):
                raise DomainError(f"need {k} positive values of u")
            object.__setattr__(self, "u", u)
        if not 0 <= self.chi <= 1:
            raise DomainError("chi must lie in [0, 1]")
        if self.start is not None:
            s = tuple(float(v) for v in self.start)
            if len(s) != k or any(v < 0 for v in s) or math.fsum(s) > 1 + 1e-12:
                raise DomainError(f"start must be {k} non-negative numbers summing to at most 1")
            object.__setattr__(self, "start", s)
        if self.gamma is not None:
            gam = np.array(self.gamma, dtype=float)
            if gam.shape != (k, self.m):
                raise DomainError(f"gamma must have shape ({k}, {self.m})")
            gam.setflags(write=False)
            object.__setattr__(self, "gamma", gam)

    def check_gamma(self) -> None:
        """Row sums and the chi condition, exactly; raises with ``(i, j)``."""
        if self.gamma is None:
            raise DomainError("gamma is required for the lower bound")
        gam = self.gamma
        k = self.m - 1
        for i in range(k):
            row = gam[i]
            if np.any(row < 0):
                raise PreconditionError(f"negative gamma in row {i + self.first_level}")
            if np.any(row[: i + 1] != 0):
                raise PreconditionError(f"gamma row {i + self.first_level} must vanish on levels <= i")
            total = math.fsum(row[i + 1:])
            if abs(total - 1.0) > 1e-12:
                raise PreconditionError(f"gamma row {i + self.first_level} sums to {total!r}, not 1",
                                        witness={"i": i + self.first_level})
            tail = np.cumsum(row[::-1])[::-1]
            for j in range(i + 1, self.m):
                if row[j] < self.chi * tail[j] - 1e-12 * max(1.0, tail[j]):
                    raise PreconditionError(
                        f"gamma[{i + self.first_level},{j + self.first_level}] = {row[j]:.6g} is below "
                        f"chi * {tail[j]:.6g}",
                        witness={"i": i + self.first_level, "j": j + self.first_level})

    def max_chi(self) -> float:
        """Largest chi for which the gamma condition holds."""
        best = 1.0
        for i in range(self.m - 1):
            row = self.gamma[i]
            tail = np.cumsum(row[::-1])[::-1]
            for j in range(i + 1, self.m):
                if tail[j] > 0:
                    best = min(best, row[j] / tail[j])
        return float(best)


def fitness_levels_upper(partition: FitnessPartition, start_level: int | None = None) -> BoundResult:
    """``sum_{i >= start_level} 1/p_i`` over the non-final levels.

    Examples
    --------
    >>> fitness_levels_upper(FitnessPartition(3, p=(0.5, 0.25))).bound
    6.0
    """
    if partition.p is None:
        raise DomainError("fitness_levels_upper needs p")
    first = partition.first_level
    start = first if start_level is None else int(start_level)
    if not first <= start <= first + partition.m - 1:
        raise DomainError(f"start level {start} outside {first}..{first + partition.m - 1}")
    terms = [1.0 / p for p in partition.p[start - first:]]
    return BoundResult(math.fsum(terms), UPPER, "fitness-levels-upper",
                       {"m": partition.m, "p": list(partition.p), "start_level": start}, ASSERTED)


def fitness_levels_lower(partition: FitnessPartition) -> BoundResult:
    """Lower bound with free-rider credit ``chi`` over later levels."""
    if partition.u is None or partition.start is None:
        raise DomainError("fitness_levels_lower needs u and start")
    partition.check_gamma()
    inv = [1.0 / v for v in partition.u]
    k = partition.m - 1
    terms, weak = [], []
    for i in range(k):
        if partition.start[i] == 0:
            continue
        later = math.fsum(inv[i + 1:])
        terms.append(partition.start[i] * (inv[i] + partition.chi * later))
        weak.append(partition.start[i] * partition.chi * (inv[i] + later))
    return BoundResult(math.fsum(terms), LOWER, "fitness-levels-lower",
                       {"m": partition.m, "u": list(partition.u), "chi": partition.chi,
                        "start": list(partition.start)},
                       "verified-by-oracle" if partition.gamma is not None else ASSERTED,
                       ("gamma/chi condition checked exactly; u_i bounds asserted by caller",),
                       {"weaker_bound": math.fsum(weak)})


def partition_from_chain(chain: MarkovChain, start) -> FitnessPartition:
    """Exact level data of a chain with one state per level.

    Levels are ordered by decreasing label (the target, label 0, is level
    ``m``).  ``p = u`` are the exact probabilities of moving to a better
    level, ``gamma`` the normalised transition split, ``chi`` the largest
    feasible value.  Fails if some level can move to a worse one.
    """
    from .oracle import start_distribution

    order = np.argsort(-chain.labels, kind="stable")
    if np.unique(chain.labels).size != chain.size:
        raise DomainError("partition_from_chain needs one state per label; lump the chain first")
    if not np.array_equal(np.flatnonzero(chain.target), order[-1:]):
        raise DomainError("the target must be the single lowest-label state")
    m = chain.size
    level_of = np.empty(m, dtype=int)
    level_of[order] = np.arange(m)
    dense = chain.matrix.toarray()
    leave = []
    gamma = np.zeros((m - 1, m))
    for lvl in range(m - 1):
        s = order[lvl]
        row = dense[s]
        for j in np.flatnonzero(row):
            if level_of[j] < lvl:
                raise PreconditionError("chain can move to a worse level", witness={"state": int(s)})
        better = row[order[lvl + 1:]]
        up = math.fsum(better)
        if up <= 0:
            raise PreconditionError("a level cannot be left", witness={"state": int(s)})
        leave.append(min(1.0, up))
        gamma[lvl, lvl + 1:] = better / up
        # absorb rounding in the last non-zero entry so the row sums to 1
        nz = np.flatnonzero(gamma[lvl])
        gamma[lvl, nz[-1]] += 1.0 - math.fsum(gamma[lvl])
    dist = start_distribution(chain, start)[order]
    part = FitnessPartition(m, p=tuple(leave), u=tuple(leave), gamma=gamma, chi=0.0, start=tuple(dist[:-1]))
    chi = max(0.0, part.max_chi() * (1 - 1e-12))
    return FitnessPartition(m, p=part.p, u=part.u, gamma=gamma, chi=chi, start=part.start)


# non-monotone and lower variable drift --------------------------------------------

def _h_clamped(h: HSpec, y: float) -> float:
    # below x_min the potential is linear with slope 1/h(x_min)
    return h(max(y, h.x_min))


def _support_steps(chain: MarkovChain, i: int):
    cols, vals = chain.row(i)
    keep = vals > 0
    return cols[keep], vals[keep]


def _c4_ratio(h: HSpec, chain: MarkovChain, live: np.ndarray, jumps: np.ndarray) -> tuple[float, tuple]:
    """max of ``h(min{x,y}) / h(max{x,y})`` over ``x`` a state, ``|x-y| <= d(x)``, ``y >= x_min``."""
    worst, pair = 1.0, None
    labels_all = np.unique(chain.labels)
    for i in live:
        x = float(chain.labels[i])
        d = float(jumps[i])
        lo, hi = max(h.x_min, x - d), min(h.x_max, x + d)
        ys = np.union1d(np.linspace(lo, hi, 201), labels_all[(labels_all >= lo) & (labels_all <= hi)])
        if h.kind == "table":
            keys = np.array([k for k, _ in h.table], dtype=float)
            ys = np.union1d(ys, keys[(keys >= lo) & (keys <= hi)])
        hx = h(x)
        for y in ys:
            hy = h(float(y))
            ratio = hy / hx if y < x else hx / hy
            if ratio > worst:
                worst, pair = ratio, (x, float(y))
    return worst, pair


def _nonmonotone_stats(chain: MarkovChain, h: HSpec):
    live = _check_layout(chain, h.x_min, h.x_max)
    prof = exact_drift_profile(chain)
    worst_ratio, ratio_state = 0.0, None
    for i in live:
        cols, vals = _support_steps(chain, i)
        step = chain.labels[cols] - chain.labels[i]
        up = math.fsum(vals[step > 0] * step[step > 0])
        down = math.fsum(-vals[step < 0] * step[step < 0])
        ratio = math.inf if down == 0 else up / down
        if ratio > worst_ratio or ratio_state is None:
            worst_ratio, ratio_state = ratio, int(i)
    c4, pair = _c4_ratio(h, chain, live, prof.max_jump)
    return live, prof, worst_ratio, ratio_state, c4, pair


def minimal_nonmonotone_c(h: HSpec, chain: MarkovChain) -> float:
    """Smallest ``c >= 1`` meeting the ratio and neighbourhood conditions.

    Raises PreconditionError when no ``c`` works.
    """
    live, prof, ratio, r_state, c4, pair = _nonmonotone_stats(chain, h)
    c = max(1.0, c4)
    if ratio > 0 and not ratio <= 1.0 / (2 * c * c) * (1 + RTOL):
        _fail_at(chain, r_state, f"up/down ratio {ratio:.6g} exceeds 1/(2c^2) for the smallest admissible c={c:.6g}")
    return c


def nonmonotone_variable_upper(h: HSpec, c: float, x0: float, chain: MarkovChain | None = None) -> BoundResult:
    """``E[T_0] <= 2c (x_min/h(x_min) + int_{x_min}^{X0} 1/h)`` for possibly
    non-monotone ``h``.

    With a chain, ``d(x)`` is the largest jump from state ``x`` and all four
    conditions are checked; the ratio condition counts a state with no
    downward move as violated.
    """
    c = float(c)
    if not c >= 1:
        raise DomainError(f"c must be at least 1, got {c!r}")
    g = build_potential(h)
    notes = []
    if chain is not None:
        live, prof, ratio, r_state, c4, pair = _nonmonotone_stats(chain, h)
        _check_drift_vs_h(chain, prof, h, live, True)
        if not ratio <= 1.0 / (2 * c * c) * (1 + RTOL):
            _fail_at(chain, r_state, f"up/down ratio {ratio:.6g} exceeds 1/(2c^2) = {1 / (2 * c * c):.6g}")
        if c4 > c * (1 + RTOL):
            x, y = pair
            raise PreconditionError(f"h(min)/h(max) = {c4:.6g} exceeds c for x={x:g}, y={y:g}",
                                    witness={"x": x, "y": y})
        notes.append("d(x) taken as the largest support jump from x")
        notes.append("neighbourhood condition checked on chain labels plus a 201-point grid per state")
    base = _g_at(g, x0)
    return BoundResult(2 * c * base, UPPER, "nonmonotone-variable-upper", {"h": h.describe(), "c": c, "X0": float(x0)},
                       _status(chain), tuple(notes), {"variable_bound": base})


def variable_lower(h: HSpec, c_map: Callable[[float], float], x0: float, chain: MarkovChain | None = None,
                   assume_monotone: bool = False) -> BoundResult:
    """``E[T_0] >= x_min/h(x_min) + int_{x_min}^{X0} 1/h`` when the process
    never moves up, never jumps below ``c(x)`` and has drift at most
    ``h(c(x))``.

    ``h`` is read as ``h(x_min)`` below ``x_min``.
    """
    notes = _require_monotone(h, assume_monotone)
    g = build_potential(h)
    if chain is not None:
        live = _check_layout(chain, h.x_min, h.x_max)
        prof = exact_drift_profile(chain)
        for i in live:
            x = float(chain.labels[i])
            cx = float(c_map(x))
            if cx > x + _slack(x):
                _fail_at(chain, i, f"c(x) = {cx:g} exceeds x")
            cols, _ = _support_steps(chain, i)
            nxt = chain.labels[cols]
            if np.any(nxt > x):
                _fail_at(chain, i, "upward transition")
            if np.any(nxt < cx - _slack(cx)):
                _fail_at(chain, i, f"transition below c(x) = {cx:g} (to {float(nxt.min()):g})")
            limit = _h_clamped(h, cx)
            if prof.drift[i] > limit + _slack(limit):
                _fail_at(chain, i, f"drift {prof.drift[i]:.6g} exceeds h(c(x)) = {limit:.6g}")
        notes.append("h read as h(x_min) below x_min")
    return BoundResult(_g_at(g, x0), LOWER, "variable-lower", {"h": h.describe(), "X0": float(x0)},
                       _status(chain), tuple(notes))


# multiplicative -----------------------------------------------------------

def _mult_args(delta: float, x_min: float, x0: float, open_top: bool = True):
    delta = float(delta)
    if not (0 < delta < 1 if open_top else 0 < delta <= 1):
        raise DomainError(f"delta must lie in (0, 1{')' if open_top else ']'}, got {delta!r}")
    x_min = _positive("x_min", x_min)
    x0 = float(x0)
    if x0 < x_min:
        raise DomainError(f"X0 = {x0} is below x_min = {x_min}")
    return delta, x_min, x0


def multiplicative_upper(delta: float, x_min: float, x0: float, chain: MarkovChain | None = None) -> BoundResult:
    """``E[T_0] <= (ln(X0/x_min) + 1) / delta``.

    Examples
    --------
    >>> multiplicative_upper(0.1, 1.0, 1.0).bound
    10.0
    """
    delta, x_min, x0 = _mult_args(delta, x_min, x0)
    if chain is not None:
        live = _check_layout(chain, x_min)
        prof = exact_drift_profile(chain)
        i = _first_violation(prof.drift, delta * chain.labels[live], live, True)
        if i is not None:
            _fail_at(chain, i, f"drift {prof.drift[i]:.6g} is below delta * x")
    return BoundResult((math.log(x0 / x_min) + 1) / delta, UPPER, "multiplicative-upper",
                       {"delta": delta, "x_min": x_min, "X0": x0}, _status(chain))


def fit_multiplicative(chain: MarkovChain, direction: str = UPPER) -> float:
    """Exact ``min`` (upper) or ``max`` (lower) of drift/x over non-target states."""
    prof = exact_drift_profile(chain)
    live = ~chain.target
    ratio = prof.drift[live] / chain.labels[live]
    return float(ratio.min() if direction == UPPER else ratio.max())


def _big_jump_prob(chain: MarkovChain, i: int, beta: float) -> float:
    cols, vals = _support_steps(chain, i)
    x = chain.labels[i]
    drop = x - chain.labels[cols]
    return math.fsum(vals[drop >= beta * x])


def _mult_lower_violation(chain: MarkovChain, live, delta: float, beta: float, x_min: float):
    for i in live:
        x = float(chain.labels[i])
        lhs = _big_jump_prob(chain, i, beta)
        rhs = beta * delta / (1 + math.log(x / x_min))
        if lhs > rhs + _slack(rhs):
            return int(i), lhs, rhs
    return None


def multiplicative_lower(delta: float, beta: float, x_min: float, x0: float,
                         chain: MarkovChain | None = None) -> BoundResult:
    """``E[T_0] >= (1 + ln(X0/x_min))/delta * (1 - beta)/(1 + beta)``."""
    delta, x_min, x0 = _mult_args(delta, x_min, x0, open_top=False)
    beta = float(beta)
    if not 0 < beta <= 1:
        raise DomainError(f"beta must lie in (0, 1], got {beta!r}")
    if chain is not None:
        live = _check_layout(chain, x_min)
        prof = exact_drift_profile(chain)
        for i in live:
            cols, _ = _support_steps(chain, i)
            if np.any(chain.labels[cols] > chain.labels[i]):
                _fail_at(chain, i, "upward transition")
        i = _first_violation(prof.drift, delta * chain.labels[live], live, False)
        if i is not None:
            _fail_at(chain, i, f"drift {prof.drift[i]:.6g} exceeds delta * x")
        bad = _mult_lower_violation(chain, live, delta, beta, x_min)
        if bad is not None:
            i, lhs, rhs = bad
            _fail_at(chain, i, f"P(jump >= beta x) = {lhs:.6g} exceeds {rhs:.6g}")
    bound = (1 + math.log(x0 / x_min)) / delta * (1 - beta) / (1 + beta)
    return BoundResult(bound, LOWER, "multiplicative-lower", {"delta": delta, "beta": beta, "x_min": x_min, "X0": x0},
                       _status(chain))


def fit_multiplicative_lower_beta(chain: MarkovChain, delta: float, x_min: float, iterations: int = 200) -> float:
    """Smallest feasible ``beta`` for the jump condition, by bisection.

    Feasibility is monotone: a larger ``beta`` shrinks the left side and
    grows the right side.
    """
    live = np.flatnonzero(~chain.target)
    if _mult_lower_violation(chain, live, delta, 1.0, x_min) is not None:
        raise PreconditionError("no beta in (0, 1] satisfies the jump condition")
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _mult_lower_violation(chain, live, delta, mid, x_min) is None:
            hi = mid
        else:
            lo = mid
    return hi


__all__ = [
    "BoundResult", "FitnessPartition", "additive_upper", "additive_lower", "fit_additive",
    "general_expected_bound", "fit_alpha", "variable_upper", "fitness_levels_upper",
    "fitness_levels_lower", "partition_from_chain", "nonmonotone_variable_upper", "minimal_nonmonotone_c",
    "variable_lower", "multiplicative_upper", "multiplicative_lower", "fit_multiplicative",
    "fit_multiplicative_lower_beta",
]

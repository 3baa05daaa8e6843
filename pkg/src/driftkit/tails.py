"""Tail bounds on first hitting times.

All bounds are accumulated in log space and exponentiated once at the
end.  A bound of 1 or more is returned as is, with ``vacuous`` set.

Per-state factors ``beta`` may be a constant, a callable of the state,
or the string ``"oracle"`` (exact mgf values read off a supplied chain).
A non-constant ``beta`` is resolved either along a caller-supplied
trajectory ``X_0, X_1, ...`` or, by default, by its supremum over the
non-target states reachable from the start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, PreconditionError
from .oracle import MarkovChain, exact_drift_profile, start_distribution
from .potential import HSpec, PotentialFunction, build_potential, integrate_reciprocal

UPPER_TAIL = "upper-tail"
LOWER_TAIL = "lower-tail"
VERIFIED = "verified-by-oracle"
ASSERTED = "asserted-by-user"
RTOL = 1e-12
ORACLE = "oracle"
DERIVATIVE_SLACK = 1e-8  # round-off of the central-difference derivative


@dataclass(frozen=True)
class TailParams:
    """Parameters of the mgf-based tail statements.

    ``beta`` is a positive constant, a callable ``beta(x)``, or ``"oracle"``.
    """

    lam: float
    beta: float | Callable[[float], float] | str
    a: float = 0.0
    t_star: int = 1
    absorbing: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError(f"lambda must be positive, got {self.lam!r}")
        if isinstance(self.beta, str):
            if self.beta != ORACLE:
                raise DomainError(f"beta must be a number, a callable or {ORACLE!r}")
        elif not callable(self.beta) and not float(self.beta) > 0:
            raise DomainError(f"beta must be positive, got {self.beta!r}")
        if int(self.t_star) != self.t_star or self.t_star < 1:
            raise DomainError(f"t_star must be a positive integer, got {self.t_star!r}")
        if self.a < 0:
            raise DomainError("a must be non-negative")
        object.__setattr__(self, "t_star", int(self.t_star))

    @property
    def constant_beta(self) -> bool:
        return not callable(self.beta) and not isinstance(self.beta, str)


@dataclass(frozen=True)
class SimplifiedTailParams:
    """``D = E(exp(lam Z))`` of a dominating jump variable, ``lam`` and slack ``delta``."""

    mgf: float
    lam: float
    delta: float

    def __post_init__(self):
        if not self.lam > 0 or not self.delta > 0:
            raise DomainError("lambda and delta must be positive")
        if not self.mgf > 1 + self.lam:
            raise DomainError(f"need D > 1 + lambda; got D = {self.mgf!r}, lambda = {self.lam!r}")

    @property
    def eta(self) -> float:
        return min(self.lam, self.delta * self.lam ** 2 / (self.mgf - 1 - self.lam))


@dataclass(frozen=True)
class TailResult:
    bound: float
    direction: str
    theorem: str
    params: dict
    precondition_status: str = ASSERTED
    trajectory_dependent: bool = False
    log_bound: float = 0.0
    notes: tuple = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction not in (UPPER_TAIL, LOWER_TAIL):
            raise ValueError(f"bad direction {self.direction!r}")
        if not self.bound >= 0:
            raise ValueError(f"bound must be non-negative, got {self.bound!r}")

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0

    def as_dict(self) -> dict:
        out = {
            "bound": self.bound,
            "log_bound": self.log_bound,
            "direction": self.direction,
            "theorem": self.theorem,
            "params": self.params,
            "precondition_status": self.precondition_status,
            "vacuous": self.vacuous,
            "trajectory_dependent": self.trajectory_dependent,
            "notes": list(self.notes),
        }
        if self.extra:
            out["extra"] = self.extra
        return out


def _exp(log_value: float) -> float:
    if log_value > 709.0:
        return math.inf
    return math.exp(log_value)


def _result(log_value: float, direction: str, theorem: str, params: dict, status: str,
            trajectory_dependent: bool = False, notes=(), extra=None) -> TailResult:
    return TailResult(_exp(log_value), direction, theorem, params, status, trajectory_dependent,
                      float(log_value), tuple(notes), extra or {})


# state-dependent factors ------------------------------------------------------

def _reachable(chain: MarkovChain, start) -> np.ndarray:
    """Boolean mask of states reachable from the start support, not passing through targets."""
    dist = start_distribution(chain, start)
    seen = dist > 0
    frontier = np.flatnonzero(seen & ~chain.target)
    while frontier.size:
        nxt = []
        for i in frontier:
            cols, vals = chain.row(int(i))
            for j in cols[vals > 0]:
                if not seen[j]:
                    seen[j] = True
                    if not chain.target[j]:
                        nxt.append(int(j))
        frontier = np.array(nxt, dtype=int)
    return seen


def _chain_for(chain: MarkovChain, a: float) -> MarkovChain:
    hit = chain.labels <= a
    if np.array_equal(hit, chain.target):
        return chain
    return chain.with_target(a)


def _beta_values(params: TailParams, chain: MarkovChain | None, exact: np.ndarray | None) -> Callable[[float], float]:
    if params.constant_beta:
        value = float(params.beta)
        return lambda x: value
    if params.beta == ORACLE:
        if chain is None or exact is None:
            raise DomainError("beta='oracle' needs a chain")
        table = {float(lab): float(v) for lab, v in zip(chain.labels, exact)}
        # several states may share a label; keep the worst one
        for lab, v in zip(chain.labels, exact):
            table[float(lab)] = max(table[float(lab)], float(v))
        return lambda x: table[float(x)]
    return params.beta


def _log_factors(params: TailParams, beta_fn, trajectory, chain, start, count: int):
    """Per-step log factors along a trajectory, or one constant log factor.

    Returns ``(logs, log_b, trajectory_dependent, supremum)``; without a
    trajectory a state-dependent beta is replaced by its supremum over the
    reachable non-target states, and the result stays flagged.
    """
    if params.constant_beta:
        return None, math.log(float(params.beta)), False, None
    if trajectory is not None:
        traj = [float(x) for x in trajectory]
        if len(traj) < count:
            raise DomainError(f"trajectory has {len(traj)} states, need {count}")
        return np.log([beta_fn(x) for x in traj[:count]]), None, True, None
    if chain is None:
        raise DomainError("a state-dependent beta needs a trajectory or a chain to take the worst case over")
    mask = _reachable(chain, start) & ~chain.target
    values = np.array([beta_fn(float(x)) for x in chain.labels[mask]])
    if values.size == 0:
        raise DomainError("no non-target state is reachable")
    sup = float(values.max())
    return None, math.log(sup), True, sup


def _g(g: PotentialFunction, x: float) -> float:
    return g(float(x))


def _check_mgf(chain: MarkovChain, values: np.ndarray, beta_fn, what: str) -> None:
    live = np.flatnonzero(~chain.target)
    for i in live:
        b = beta_fn(float(chain.labels[i]))
        if values[i] > b + RTOL * max(1.0, b):
            label = float(chain.labels[i])
            raise PreconditionError(f"{what} {values[i]:.12g} exceeds beta = {b:.12g} at state {i} (label {label:g})",
                                    witness={"state": int(i), "label": label})


def _check_drift(chain: MarkovChain, h: HSpec, at_least: bool) -> None:
    """Drift against ``h`` at every state above ``a`` (the non-target states)."""
    drift = exact_drift_profile(chain).drift
    for i in np.flatnonzero(~chain.target):
        x = float(chain.labels[i])
        if not h.x_min - RTOL * max(1.0, h.x_min) <= x <= h.x_max:
            raise PreconditionError(f"label {x:g} lies outside the domain of h", witness={"state": int(i), "label": x})
        hx = h(min(max(x, h.x_min), h.x_max))
        slack = RTOL * max(1.0, hx)
        if (at_least and drift[i] < hx - slack) or (not at_least and drift[i] > hx + slack):
            rel = ">=" if at_least else "<="
            raise PreconditionError(f"drift {drift[i]:.6g} violates drift {rel} h(x) = {hx:.6g} at state {i} "
                                    f"(label {x:g})", witness={"state": int(i), "label": x})


def _start_check(x0: float, a: float) -> None:
    if not x0 > a:
        raise DomainError(f"X0 = {x0} must exceed a = {a}")


# general theorem, upper tail ---------------------------------------------------

def general_tail_upper(g: PotentialFunction, params: TailParams, x0: float, trajectory: Sequence[float] | None = None,
                       chain: MarkovChain | None = None, start=None) -> TailResult:
    """Bound on ``P(T_a >= t*)`` from ``E(exp(-lam (g(X_t) - g(X_{t+1})))) <= beta_u(X_t)``.

    The displayed bound is ``prod_{r<t*} beta_u(X_r) * exp(lam (g(X0) - g(a)))``.
    For ``a > 0`` a run may overshoot ``a`` and land below it, where ``g``
    is smaller than ``g(a)``; the returned value is then the smaller of
    ``prod_{r<t*} beta_u * exp(lam (g(X0) - g_low))`` (``g_low`` the least
    potential reachable) and ``prod_{r<t*-1} beta_u * exp(lam (g(X0) - g(a)))``,
    both of which hold without further assumptions.  For ``a = 0`` all
    three coincide.

    Parameters
    ----------
    chain, start : optional
        With a chain the mgf condition is checked exactly at every state
        above ``a``.  ``start`` defaults to the state labelled ``x0``.
    """
    x0 = float(x0)
    _start_check(x0, params.a)
    lam, t = params.lam, params.t_star
    g0, ga = _g(g, x0), _g(g, params.a)
    status, exact = ASSERTED, None
    if chain is not None:
        chain = _chain_for(chain, params.a)
        exact = exact_drift_profile(chain, g, lam).mgf_neg
        if start is None:
            start = chain.state_index(x0)
    beta_fn = _beta_values(params, chain, exact)
    if chain is not None:
        _check_drift(chain, g.h, True)
        _check_mgf(chain, exact, beta_fn, "E(exp(-lam Delta))")
        status = VERIFIED
    logs, log_b, traj_dep, sup = _log_factors(params, beta_fn, trajectory, chain, start, t)
    if logs is not None:
        log_prod_t, log_prod_tm1 = math.fsum(logs[:t]), math.fsum(logs[: t - 1])
    else:
        log_prod_t, log_prod_tm1 = t * log_b, (t - 1) * log_b
    stated = log_prod_t + lam * (g0 - ga)
    notes, extra = [], {"stated_log_bound": stated}
    if sup is not None:
        notes.append("state-dependent beta replaced by its supremum over reachable states")
        extra["beta_sup"] = sup
    if params.a > 0:
        g_low = 0.0 if chain is None else float(np.min([_g(g, x) for x in chain.labels]))
        log_value = min(log_prod_t + lam * (g0 - g_low), log_prod_tm1 + lam * (g0 - ga))
        extra["stated_bound"] = _exp(stated)
        notes.append("a > 0: overshoot-safe form reported; the uncorrected form is in extra")
    else:
        log_value = stated
    p = {"lambda": lam, "beta_u": _describe_beta(params.beta), "a": params.a, "t_star": t, "X0": x0}
    return _result(log_value, UPPER_TAIL, "general-tail-upper", p, status, traj_dep, notes, extra)


def _describe_beta(beta):
    if callable(beta):
        return getattr(beta, "__name__", "callable")
    return beta


# general theorem, lower tail ------------------------------------------------------

def _absorbing_targets(chain: MarkovChain) -> bool:
    for i in np.flatnonzero(chain.target):
        cols, vals = chain.row(int(i))
        if np.any(~chain.target[cols[vals > 0]]):
            return False
    return True


def general_tail_lower(g: PotentialFunction, params: TailParams, x0: float, trajectory: Sequence[float] | None = None,
                       chain: MarkovChain | None = None, start=None) -> TailResult:
    """Bound on ``P(T_a < t*)`` from ``E(exp(lam (g(X_t) - g(X_{t+1})))) <= beta_l(X_t)``.

    Sum form: ``sum_{s=1}^{t*-1} prod_{r<s} beta_l(X_r) * exp(-lam (g(X0) - g(a)))``.
    Product form (states ``<= a`` absorbing): ``prod_{r<t*} beta_l(X_r)``
    times the same exponential.  The product form is offered only when
    the target is absorbing and every factor is at least 1; the smaller
    applicable form is returned and both are reported in ``extra``.
    """
    x0 = float(x0)
    _start_check(x0, params.a)
    lam, t = params.lam, params.t_star
    g0, ga = _g(g, x0), _g(g, params.a)
    status, exact = ASSERTED, None
    absorbing = params.absorbing
    if chain is not None:
        chain = _chain_for(chain, params.a)
        exact = exact_drift_profile(chain, g, lam).mgf_pos
        if start is None:
            start = chain.state_index(x0)
        if absorbing and not _absorbing_targets(chain):
            raise PreconditionError("absorbing form requested but a target state can leave the target set")
    beta_fn = _beta_values(params, chain, exact)
    if chain is not None:
        _check_drift(chain, g.h, False)
        _check_mgf(chain, exact, beta_fn, "E(exp(lam Delta))")
        status = VERIFIED
    logs, log_b, traj_dep, sup = _log_factors(params, beta_fn, trajectory, chain, start, t)
    gap = -lam * (g0 - ga)
    notes, extra = [], {}
    if sup is not None:
        notes.append("state-dependent beta replaced by its supremum over reachable states")
        extra["beta_sup"] = sup
    # prefix products prod_{r<s}, s = 1 .. t*-1
    if t == 1:
        log_sum = -math.inf
    elif logs is not None:
        log_sum = float(logsumexp(np.cumsum(logs[: t - 1])))
    elif log_b == 0.0:
        log_sum = math.log(t - 1)
    else:
        # log of b (b^(t-1) - 1)/(b - 1), with b = exp(log_b)
        m = t - 1
        if log_b > 0:
            log_sum = log_b + m * log_b + math.log(-math.expm1(-m * log_b)) - math.log(math.expm1(log_b))
        else:
            log_sum = log_b + math.log(-math.expm1(m * log_b)) - math.log(-math.expm1(log_b))
    sum_form = log_sum + gap
    extra["sum_form"] = _exp(sum_form)
    log_value, chosen = sum_form, "sum"
    if absorbing:
        factors_ok = (logs is None and log_b >= 0) or (logs is not None and bool(np.all(logs[:t] >= 0)))
        if factors_ok:
            prod = (math.fsum(logs[:t]) if logs is not None else t * log_b) + gap
            extra["product_form"] = _exp(prod)
            if prod < log_value:
                log_value, chosen = prod, "product"
        else:
            notes.append("product form withheld: it needs every beta_l >= 1")
    extra["chosen_form"] = chosen
    p = {"lambda": lam, "beta_l": _describe_beta(params.beta), "a": params.a, "t_star": t, "X0": x0,
         "absorbing": absorbing}
    return _result(log_value, LOWER_TAIL, "general-tail-lower", p, status, traj_dep, notes, extra)


# derivative-condition corollary ---------------------------------------------------

COROLLARY_UPPER = "upper"
COROLLARY_LOWER = "lower"


def _derivative_witness(h: HSpec, lam: float, upper: bool):
    for x in h.sample_points():
        d = h.derivative(float(x))
        slack = DERIVATIVE_SLACK * max(1.0, lam)
        if (upper and d < lam - slack) or (not upper and d > -lam + slack):
            return float(x), d
    return None


def corollary_bounds(h: HSpec, lam: float, x0: float, t: float, which: str = COROLLARY_UPPER,
                     chain: MarkovChain | None = None) -> TailResult:
    """Tail bounds for ``T = min{t : X_t = 0}`` when ``h' >= lam`` (``"upper"``)
    or ``h' <= -lam`` (``"lower"``).

    ``"upper"``: ``P(T >= t) < exp(-lam (t - g(X0)))``.
    ``"lower"``: ``P(T < t) < (e^{lam t} - e^{lam}) / (e^{lam} - 1) * exp(-lam g(X0))``.

    The derivative condition is checked on the sample grid of ``h``.  With
    a chain, the drift condition and the exact mgf condition behind the
    bound (factor ``e^{-lam}`` resp. ``e^{lam}`` per step) are also checked.
    """
    lam = float(lam)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if which not in (COROLLARY_UPPER, COROLLARY_LOWER):
        raise DomainError(f"which must be {COROLLARY_UPPER!r} or {COROLLARY_LOWER!r}")
    upper = which == COROLLARY_UPPER
    bad = _derivative_witness(h, lam, upper)
    if bad is not None:
        x, d = bad
        rel = ">= lambda" if upper else "<= -lambda"
        raise PreconditionError(f"h'({x:g}) = {d:.6g} violates h' {rel}", witness={"x": x, "derivative": d})
    g = build_potential(h)
    g0 = _g(g, x0)
    status, notes = ASSERTED, ["derivative condition checked on a sample grid"]
    if chain is not None:
        from .theorems import _check_drift_vs_h, _check_layout

        live = _check_layout(chain, h.x_min, h.x_max)
        prof = exact_drift_profile(chain, g, lam)
        _check_drift_vs_h(chain, prof, h, live, upper)
        if upper:
            _check_mgf(chain, prof.mgf_neg, lambda x: math.exp(-lam), "E(exp(-lam Delta))")
        else:
            _check_mgf(chain, prof.mgf_pos, lambda x: math.exp(lam), "E(exp(lam Delta))")
        status = VERIFIED
    t = float(t)
    if upper:
        log_value = -lam * (t - g0)
        direction = UPPER_TAIL
    else:
        if t <= 1:
            log_value = -math.inf
        else:
            # log(e^{lam t} - e^{lam}) - log(e^{lam} - 1)
            log_value = lam * t + math.log(-math.expm1(lam * (1 - t))) - math.log(math.expm1(lam)) - lam * g0
        direction = LOWER_TAIL
    p = {"lambda": lam, "X0": float(x0), "t": t, "which": which, "h": h.describe()}
    return _result(log_value, direction, f"derivative-tail-{which}", p, status, False, notes, {"g_X0": g0})


# simplified exponential-moment theorem -----------------------------------------------

def simplified_tail(h: HSpec, sp: SimplifiedTailParams, x0: float, t_star: float, direction: str = UPPER_TAIL,
                    absorbing: bool = False) -> TailResult:
    """Tails from a dominating jump variable ``Z`` with ``E(exp(lam Z)) = D``.

    ``G0 = int_{x_min}^{X0} 1/h``.  Upper: ``exp(eta (G0 - (1 - delta) t*))``.
    Lower: ``exp(eta ((1 + delta) t* - G0)) / (eta (1 + delta))``, without the
    divisor when the target is absorbing.

    Examples
    --------
    >>> sp = SimplifiedTailParams(mgf=math.e, lam=1.0, delta=0.5)
    >>> round(simplified_tail(HSpec.constant(1.0, x_min=0.0), sp, 10.0, 30).bound, 4)
    0.0308
    """
    if direction not in (UPPER_TAIL, LOWER_TAIL):
        raise DomainError(f"direction must be {UPPER_TAIL!r} or {LOWER_TAIL!r}")
    x0 = float(x0)
    if x0 < h.x_min:
        raise DomainError(f"X0 = {x0} is below x_min = {h.x_min}")
    big_g = integrate_reciprocal(h, h.x_min, x0)
    eta, delta, t = sp.eta, sp.delta, float(t_star)
    if direction == UPPER_TAIL:
        log_value = eta * (big_g - (1 - delta) * t)
    else:
        log_value = eta * ((1 + delta) * t - big_g)
        if not absorbing:
            log_value -= math.log(eta * (1 + delta))
    p = {"D": sp.mgf, "lambda": sp.lam, "delta": delta, "eta": eta, "X0": x0, "t_star": t,
         "absorbing": absorbing}
    return _result(log_value, direction, "simplified-tail", p, ASSERTED, False,
                   ("jump-domination by Z asserted by caller",), {"G0": big_g})


def mgf_of_geometric_mix(flip_prob: float, scale: float, lam: float) -> float:
    """``E(exp(lam * scale * Y))`` where ``Y = 0`` w.p. ``1 - flip_prob`` and
    otherwise ``Y`` is geometric with parameter 1/2 on ``{1, 2, ...}``.

    Examples
    --------
    >>> mgf_of_geometric_mix(0.3, 5.0, 0.0)
    1.0
    """
    q = float(flip_prob)
    if not 0 <= q <= 1:
        raise DomainError("flip_prob must lie in [0, 1]")
    if lam < 0 or scale < 0:
        raise DomainError("lambda and scale must be non-negative")
    half = math.exp(lam * scale) / 2
    if half >= 1:
        raise DomainError(f"mgf diverges: lambda * scale = {lam * scale:g} >= ln 2")
    return (1 - q) + q * half / (1 - half)


# multiplicative drift tail ------------------------------------------------------

def multiplicative_tail(delta: float, x_min: float, x0: float, t_star: float) -> TailResult:
    """Bound on ``P(T >= t*)`` under multiplicative drift ``delta``.

    Returns ``(1 - delta)^{ceil(t*) - 1} X0 / x_min``, which holds for
    ``P(T >= t*)``; the simpler ``exp(-delta t* + ln(X0/x_min))`` (a bound on
    ``P(T > t*)`` for integer ``t*``) is in ``extra``.  At
    ``t* = (ln(X0/x_min) + r)/delta`` the latter is ``e^{-r}``.
    """
    delta = float(delta)
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if not x0 >= x_min > 0:
        raise DomainError("need X0 >= x_min > 0")
    t = float(t_star)
    if t <= 0:
        return _result(0.0, UPPER_TAIL, "multiplicative-tail", {"delta": delta, "x_min": x_min, "X0": x0, "t_star": t},
                       ASSERTED)
    ratio = math.log(x0 / x_min)
    log_value = (math.ceil(t) - 1) * math.log1p(-delta) + ratio
    stated = -delta * t + ratio
    p = {"delta": delta, "x_min": x_min, "X0": float(x0), "t_star": t}
    return _result(log_value, UPPER_TAIL, "multiplicative-tail", p, ASSERTED, False, (),
                   {"exponential_form": _exp(stated)})


def multiplicative_tail_time(delta: float, x_min: float, x0: float, r: float) -> float:
    """``(ln(X0/x_min) + r) / delta``."""
    return (math.log(x0 / x_min) + r) / delta


__all__ = [
    "TailParams", "SimplifiedTailParams", "TailResult", "general_tail_upper", "general_tail_lower",
    "corollary_bounds", "simplified_tail", "mgf_of_geometric_mix", "multiplicative_tail",
    "multiplicative_tail_time", "UPPER_TAIL", "LOWER_TAIL",
]

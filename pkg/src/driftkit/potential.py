"""Drift-bound functions h and the potential g built from them.

The potential is

    g(0) = 0,    g(x) = x_min / h(x_min) + int_{x_min}^{x} 1/h(y) dy

on ``[x_min, x_max]``.  Points strictly between 0 and ``x_min`` are not part
of the domain and evaluating there raises :class:`DomainError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConvergenceError, DomainError, PreconditionError
from .expr import Expr, parse

CONSTANT = "constant"
MULTIPLICATIVE = "multiplicative"
EXPRESSION = "expression"
TABLE = "table"

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-9
QUAD_MAX_DEPTH = 60
N_SAMPLES = 1000
_EDGE_TOL = 1e-12


def _sample_grid(lo: float, hi: float, num: int = N_SAMPLES) -> np.ndarray:
    if hi == lo:
        return np.array([lo])
    return np.linspace(lo, hi, num)


@dataclass(frozen=True)
class HSpec:
    """A positive drift-bound function h on ``[x_min, x_max]``.

    Build one with :meth:`constant`, :meth:`multiplicative`,
    :meth:`expression` or :meth:`table`; the constructor validates
    positivity on a 1000-point grid plus every table entry.

    Parameters
    ----------
    kind : str
        ``"constant"``, ``"multiplicative"``, ``"expression"`` or ``"table"``.
    x_min, x_max : float
        Domain.  ``x_min = 0`` is only accepted for the constant kind.
    rate : float, optional
        The constant value, or the factor in ``h(x) = rate * x``.
    expr : Expr, optional
        Parsed expression in ``x`` (and optionally ``n``).
    table : tuple of (int, float), optional
        Values at integers; reals use ``h(x) = h(ceil(x))``.
    n : float, optional
        Value bound to the variable ``n`` inside an expression.
    """

    kind: str
    x_min: float
    x_max: float
    rate: float | None = None
    expr: Expr | None = None
    table: tuple = ()
    n: float | None = None
    _lookup: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (CONSTANT, MULTIPLICATIVE, EXPRESSION, TABLE):
            raise ValueError(f"unknown h kind {self.kind!r}")
        x_min, x_max = float(self.x_min), float(self.x_max)
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x_max", x_max)
        if math.isnan(x_min) or math.isnan(x_max) or x_max < x_min:
            raise DomainError(f"invalid domain [{x_min}, {x_max}]")
        if x_min < 0 or (x_min == 0 and self.kind != CONSTANT):
            raise DomainError("x_min must be positive (0 is allowed only for constant h)")
        if self.kind in (EXPRESSION, TABLE) and not math.isfinite(x_max):
            raise DomainError(f"{self.kind} h needs a finite x_max")
        if self.kind in (CONSTANT, MULTIPLICATIVE):
            if self.rate is None or not self.rate > 0 or not math.isfinite(self.rate):
                raise PreconditionError(f"{self.kind} h needs a positive finite rate, got {self.rate!r}",
                                        witness=x_min)
        if self.kind == EXPRESSION:
            if self.expr is None:
                raise ValueError("expression h needs an expression")
            if "n" in self.expr.variables and self.n is None:
                raise DomainError(f"expression {self.expr.source!r} uses n but no n was given")
        if self.kind == TABLE:
            lookup = {int(k): float(v) for k, v in self.table}
            need = range(math.ceil(x_min), math.ceil(x_max) + 1)
            missing = [k for k in need if k not in lookup]
            if missing:
                raise DomainError(f"table h is missing integer keys {missing[:5]}")
            object.__setattr__(self, "table", tuple(sorted(lookup.items())))
            object.__setattr__(self, "_lookup", lookup)
        self._check_positive()

    # constructors -----------------------------------------------------

    @classmethod
    def constant(cls, delta: float, x_min: float = 0.0, x_max: float = math.inf) -> "HSpec":
        return cls(CONSTANT, x_min, x_max, rate=float(delta))

    @classmethod
    def multiplicative(cls, delta: float, x_min: float = 1.0, x_max: float = math.inf) -> "HSpec":
        return cls(MULTIPLICATIVE, x_min, x_max, rate=float(delta))

    @classmethod
    def expression(cls, text: str | Expr, x_min: float, x_max: float, n: float | None = None) -> "HSpec":
        expr = parse(text) if isinstance(text, str) else text
        return cls(EXPRESSION, x_min, x_max, expr=expr, n=None if n is None else float(n))

    @classmethod
    def from_table(cls, values: Mapping[int, float], x_min: float | None = None,
                   x_max: float | None = None) -> "HSpec":
        keys = sorted(int(k) for k in values)
        if not keys:
            raise DomainError("empty table")
        lo = keys[0] if x_min is None else x_min
        hi = keys[-1] if x_max is None else x_max
        return cls(TABLE, lo, hi, table=tuple((int(k), float(v)) for k, v in values.items()))

    # evaluation -------------------------------------------------------

    def _in_domain(self, x: float) -> bool:
        scale = max(1.0, abs(self.x_max)) if math.isfinite(self.x_max) else 1.0
        return self.x_min - _EDGE_TOL * max(1.0, self.x_min) <= x <= self.x_max + _EDGE_TOL * scale

    def __call__(self, x: float) -> float:
        x = float(x)
        if not self._in_domain(x):
            raise DomainError(f"h evaluated outside [{self.x_min}, {self.x_max}] at x={x}")
        return self._raw(x)

    def _raw(self, x: float) -> float:
        if self.kind == CONSTANT:
            return self.rate
        if self.kind == MULTIPLICATIVE:
            return self.rate * x
        if self.kind == TABLE:
            k = math.ceil(x - 1e-12 * max(1.0, abs(x)))
            k = min(max(k, math.ceil(self.x_min)), math.ceil(self.x_max))
            return self._lookup[k]
        return self.expr(x, self.n)

    def vector(self, xs) -> np.ndarray:
        """Evaluate h on an array of in-domain points."""
        xs = np.asarray(xs, dtype=float)
        if self.kind == CONSTANT:
            return np.full(xs.shape, self.rate)
        if self.kind == MULTIPLICATIVE:
            return self.rate * xs
        if self.kind == EXPRESSION:
            return self.expr(xs, self.n)
        return np.array([self._raw(x) for x in xs.ravel()]).reshape(xs.shape)

    def sample_points(self) -> np.ndarray:
        """Grid of 1000 points plus every table key inside the domain."""
        hi = self.x_max if math.isfinite(self.x_max) else max(2.0 * self.x_min, self.x_min + 1.0)
        pts = _sample_grid(self.x_min, hi)
        if self.kind == TABLE:
            keys = np.array([k for k, _ in self.table if self.x_min <= k <= self.x_max], dtype=float)
            pts = np.union1d(pts, keys)
        return pts

    def _check_positive(self) -> None:
        pts = self.sample_points()
        try:
            vals = self.vector(pts)
        except DomainError as exc:
            raise PreconditionError(f"h is not evaluable on its domain: {exc}") from exc
        if self.kind == TABLE:
            vals = np.concatenate([vals, [v for _, v in self.table]])
            pts = np.concatenate([pts, [k for k, _ in self.table]])
        bad = np.flatnonzero(~(vals > 0) | ~np.isfinite(vals))
        if bad.size:
            x = float(pts[bad[0]])
            raise PreconditionError(f"h must be positive; h({x}) = {vals[bad[0]]}", witness=x)

    def derivative(self, x: float) -> float:
        """h'(x); finite differences for expressions."""
        if self.kind == CONSTANT:
            return 0.0
        if self.kind == MULTIPLICATIVE:
            return self.rate
        if self.kind == TABLE:
            raise DomainError("table h is not differentiable")
        step = max(1e-6, 1e-8 * abs(x))
        lo_ok = x - step >= self.x_min
        hi_ok = x + step <= self.x_max
        if lo_ok and hi_ok:
            return (self._raw(x + step) - self._raw(x - step)) / (2 * step)
        if hi_ok:
            return (self._raw(x + step) - self._raw(x)) / step
        if lo_ok:
            return (self._raw(x) - self._raw(x - step)) / step
        return 0.0

    def monotone_witness(self) -> tuple[float, float] | None:
        """First sampled pair ``x < y`` with ``h(x) > h(y)``, or None.

        Sampling is a heuristic; it cannot prove monotonicity.
        """
        if self.kind in (CONSTANT, MULTIPLICATIVE):
            return None
        pts = self.sample_points()
        vals = self.vector(pts)
        drop = np.flatnonzero(vals[1:] < vals[:-1] * (1 - 1e-12) - 1e-300)
        if drop.size:
            i = int(drop[0])
            return float(pts[i]), float(pts[i + 1])
        return None

    def describe(self) -> dict:
        out = {"kind": self.kind, "x_min": self.x_min, "x_max": self.x_max}
        if self.rate is not None:
            out["rate"] = self.rate
        if self.expr is not None:
            out["expression"] = self.expr.source
        if self.n is not None:
            out["n"] = self.n
        if self.kind == TABLE:
            out["table_size"] = len(self.table)
        return out


# quadrature -------------------------------------------------------------

def _adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                      abs_tol: float, rel_tol: float, max_depth: int) -> float:
    """Adaptive Simpson with Richardson correction on ``[a, b]``."""
    panels = 8
    edges = np.linspace(a, b, panels + 1)
    # work stack entries: (a, m, b, fa, fm, fb, whole, tol, depth)
    stack = []
    coarse = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        coarse += whole
        stack.append((lo, mid, hi, flo, fmid, fhi, whole, 0))
    tol_total = max(abs_tol, rel_tol * abs(coarse))
    total = []
    failed = False
    width = b - a
    while stack:
        lo, mid, hi, flo, fmid, fhi, whole, depth = stack.pop()
        tol = tol_total * (hi - lo) / width
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        diff = left + right - whole
        if abs(diff) <= 15.0 * tol or depth >= max_depth or mid - lo <= 0 or hi - mid <= 0:
            if abs(diff) > 15.0 * tol:
                failed = True
            total.append(left + right + diff / 15.0)
            continue
        stack.append((mid, rm, hi, fmid, frm, fhi, right, depth + 1))
        stack.append((lo, lm, mid, flo, flm, fmid, left, depth + 1))
    estimate = math.fsum(total)
    if failed:
        raise ConvergenceError(f"quadrature on [{a}, {b}] did not reach tolerance within depth {max_depth}",
                               estimate)
    return estimate


def _table_integral(h: HSpec, lo: float, hi: float) -> float:
    parts = []
    k = math.ceil(lo)
    left = lo
    while left < hi:
        right = min(float(k), hi)
        if right > left:
            parts.append((right - left) / h._lookup[max(k, math.ceil(h.x_min))])
        left = right
        k += 1
    return math.fsum(parts)


def integrate_reciprocal(h: HSpec, lo: float, hi: float) -> float:
    """Integral of ``1/h`` over ``[lo, hi]`` inside the domain of ``h``.

    Exact for constant, multiplicative and table kinds; adaptive Simpson
    (abs tol 1e-10, rel tol 1e-9, depth cap 60) for expressions.

    Raises
    ------
    ConvergenceError
        If the quadrature misses its tolerance; ``.estimate`` holds the value.
    """
    lo, hi = float(lo), float(hi)
    if hi < lo:
        raise DomainError(f"integration bounds reversed: {lo} > {hi}")
    if not (h._in_domain(lo) and h._in_domain(hi)):
        raise DomainError(f"integration range [{lo}, {hi}] leaves [{h.x_min}, {h.x_max}]")
    if hi == lo:
        return 0.0
    if h.kind == CONSTANT:
        return (hi - lo) / h.rate
    if h.kind == MULTIPLICATIVE:
        return math.log(hi / lo) / h.rate
    if h.kind == TABLE:
        return _table_integral(h, lo, hi)

    def recip(y):
        return 1.0 / h.expr(y, h.n)

    # split at integers when ceil introduces jumps
    cuts = [lo]
    if h.expr.uses_ceil:
        cuts += [float(k) for k in range(math.floor(lo) + 1, math.ceil(hi))]
    cuts.append(hi)
    pieces = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            pieces.append(_adaptive_simpson(recip, a, b, QUAD_ABS_TOL, QUAD_REL_TOL, QUAD_MAX_DEPTH))
    return math.fsum(pieces)


# potential --------------------------------------------------------------

CLOSED_FORM = "closed-form"
PREFIX_SUM = "prefix-sum"
QUADRATURE = "quadrature"


@dataclass(frozen=True)
class PotentialFunction:
    """The potential g for a drift bound ``h``.

    Attributes
    ----------
    h : HSpec
    mode : str
        ``"closed-form"``, ``"prefix-sum"`` or ``"quadrature"``.
    g_min : float
        ``g(x_min) = x_min / h(x_min)``.
    """

    h: HSpec
    mode: str
    g_min: float
    _prefix: tuple = field(default=(), repr=False, compare=False)

    @property
    def x_min(self) -> float:
        return self.h.x_min

    @property
    def x_max(self) -> float:
        return self.h.x_max

    def _check(self, x: float) -> None:
        if x < 0 or math.isnan(x):
            raise DomainError(f"g is undefined at negative x={x}")
        if 0 < x and not self.h._in_domain(x):
            if x < self.h.x_min:
                raise DomainError(f"g is undefined in the gap (0, x_min={self.h.x_min}) at x={x}")
            raise DomainError(f"g is undefined above x_max={self.h.x_max} at x={x}")

    def __call__(self, x: float) -> float:
        x = float(x)
        self._check(x)
        if x == 0.0:
            return 0.0
        x = min(max(x, self.h.x_min), self.h.x_max)
        h = self.h
        if h.kind == CONSTANT:
            return x / h.rate
        if h.kind == MULTIPLICATIVE:
            return 1.0 / h.rate + math.log(x / h.x_min) / h.rate
        if h.kind == TABLE:
            return self._prefix_value(x)
        return self.g_min + integrate_reciprocal(h, h.x_min, x)

    def _prefix_value(self, x: float) -> float:
        h = self.h
        first = math.ceil(h.x_min)
        k = math.ceil(x - 1e-12 * max(1.0, x))
        if k <= first:
            return self.g_min + (x - h.x_min) / h._lookup[first]
        # _prefix[j] = g(first + j), each a single correctly rounded sum
        if x == k:
            return self._prefix[k - first]
        return self._prefix[k - 1 - first] + (x - (k - 1)) / h._lookup[k]

    def values(self, xs) -> np.ndarray:
        """Evaluate g at many points, integrating once along the sorted order."""
        xs = np.asarray(xs, dtype=float)
        out = np.empty(xs.shape)
        flat = xs.ravel()
        if self.mode != QUADRATURE:
            out.ravel()[:] = [self(x) for x in flat]
            return out
        order = np.argsort(flat, kind="stable")
        res = np.empty(flat.shape)
        prev_x, prev_g = self.h.x_min, self.g_min
        for idx in order:
            x = float(flat[idx])
            self._check(x)
            if x == 0.0:
                res[idx] = 0.0
                continue
            x = min(max(x, self.h.x_min), self.h.x_max)
            prev_g = prev_g + integrate_reciprocal(self.h, prev_x, x)
            prev_x = x
            res[idx] = prev_g
        return res.reshape(xs.shape)

    def describe(self) -> dict:
        return {"mode": self.mode, "g_x_min": self.g_min, "h": self.h.describe()}


def build_potential(h: HSpec) -> PotentialFunction:
    """Construct g for ``h``; picks the cheapest exact evaluation mode.

    Examples
    --------
    >>> g = build_potential(HSpec.multiplicative(0.1, x_min=1.0))
    >>> round(g(math.e), 12)
    20.0
    """
    if h.kind == CONSTANT:
        g_min = h.x_min / h.rate
        return PotentialFunction(h, CLOSED_FORM, g_min)
    if h.kind == MULTIPLICATIVE:
        return PotentialFunction(h, CLOSED_FORM, 1.0 / h.rate)
    g_min = h.x_min / h(h.x_min)
    if h.kind == TABLE:
        first = math.ceil(h.x_min)
        g_first = g_min + (first - h.x_min) / h._lookup[first]
        prefix = [g_first]
        acc = [g_first]
        for k in range(first + 1, math.ceil(h.x_max) + 1):
            acc.append(1.0 / h._lookup[k])
            prefix.append(math.fsum(acc))
        return PotentialFunction(h, PREFIX_SUM, g_min, tuple(prefix))
    return PotentialFunction(h, QUADRATURE, g_min)


def exp_potential_second_differences(g: PotentialFunction, lam: float, sign: int = 1,
                                     num: int = N_SAMPLES) -> np.ndarray:
    """Second differences of ``exp(sign * lam * g(x))`` on a uniform grid.

    Non-positive everywhere means concave on the grid, non-negative convex.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    hi = g.x_max if math.isfinite(g.x_max) else 2.0 * g.x_min + 1.0
    xs = _sample_grid(g.x_min, hi, num)
    f = np.exp(sign * lam * g.values(xs))
    return f[2:] - 2.0 * f[1:-1] + f[:-2]

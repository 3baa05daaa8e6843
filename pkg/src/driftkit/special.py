"""Exponential integral E1(x) = int_x^inf e^{-t}/t dt for real x > 0."""
from __future__ import annotations

import math

from .errors import ConvergenceError, DomainError

EULER_GAMMA = 0.5772156649015329

_TINY = 1e-300
_MAX_ITER = 10_000


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    for k in range(1, _MAX_ITER):
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < 1e-16:
            return -EULER_GAMMA - math.log(x) - total
    raise ConvergenceError("E1 series did not converge", -EULER_GAMMA - math.log(x) - total)


def _e1_continued_fraction(x: float) -> float:
    # modified Lentz on e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * math.exp(-x)
    raise ConvergenceError("E1 continued fraction did not converge", h * math.exp(-x))


def exp_integral_e1(x: float) -> float:
    """Exponential integral E1 at ``x > 0``.

    Uses the alternating power series for ``x <= 1`` and a continued
    fraction otherwise.

    Examples
    --------
    >>> round(exp_integral_e1(0.5), 6)
    0.559774
    """
    x = float(x)
    if not x > 0.0 or math.isnan(x):
        raise DomainError(f"E1 requires x > 0, got {x!r}")
    if math.isinf(x):
        return 0.0
    if x <= 1.0:
        return _e1_series(x)
    return _e1_continued_fraction(x)

"""Exponential integral E1 on the real line.

For u > 0 this is E1(u) = integral of exp(-t)/t over [u, inf).  For u < 0
the integral crosses the pole at 0 and we return its Cauchy principal value,
-Ei(-u).  u = 0 is a pole and is rejected by the caller.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286060651209008240243
_EPS = 1e-17
_SERIES_CUTOFF = 4.0
# Ei(w) power series has only positive terms, so it stays accurate far past
# |u| = 4; the asymptotic series only reaches full precision near w ~ 40.
_EI_ASYMPTOTIC_FROM = 40.0


def _e1_series(x: float) -> float:
    total = 0.0
    term = 1.0
    k = 1
    while True:
        term *= -x / k
        inc = term / k
        total += inc
        if abs(inc) < _EPS * max(abs(total), 1.0):
            break
        k += 1
    return -EULER_GAMMA - math.log(x) - total


def _e1_continued_fraction(x: float) -> float:
    # modified Lentz evaluation of exp(x) E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x)


def _ei_series(w: float) -> float:
    total = 0.0
    term = 1.0
    k = 1
    while True:
        term *= w / k
        inc = term / k
        total += inc
        if inc < _EPS * total:
            break
        k += 1
    return EULER_GAMMA + math.log(w) + total


def _ei_asymptotic(w: float) -> float:
    total = 1.0
    term = 1.0
    k = 1
    while True:
        prev = term
        term *= k / w
        if term >= prev or term < _EPS:
            break
        total += term
        k += 1
    return math.exp(w) / w * total


def exp_int1_scalar(u: float) -> float:
    """E1(u) for u > 0, principal value -Ei(-u) for u < 0."""
    if u == 0.0:
        raise ZeroDivisionError("E1 has a pole at 0")
    if math.isnan(u):
        return math.nan
    if u > 0:
        if u > 745.0:
            return 0.0
        return _e1_series(u) if u <= _SERIES_CUTOFF else _e1_continued_fraction(u)
    w = -u
    if w > 709.0:
        return -math.inf
    ei = _ei_series(w) if w <= _EI_ASYMPTOTIC_FROM else _ei_asymptotic(w)
    return -ei


def exp_int1(u):
    """Vectorized ``exp_int1_scalar``; zeros must be filtered by the caller."""
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0:
        return np.float64(exp_int1_scalar(float(arr)))
    out = np.empty_like(arr)
    flat_in = arr.ravel()
    flat_out = out.ravel()
    for i, v in enumerate(flat_in):
        flat_out[i] = exp_int1_scalar(float(v))
    return out

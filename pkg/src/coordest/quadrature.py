"""Numerical integration helpers.

``adaptive_simpson`` is the general-purpose scalar integrator.  ``graded``
is a fixed composite Gauss-Legendre rule whose panels shrink geometrically
toward both ends of the interval; it vectorizes over many integrands and
copes with log or mild power singularities at either endpoint.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np

MAX_SUBDIVISIONS = 2**20


class QuadratureError(RuntimeError):
    pass


def adaptive_simpson(fn: Callable[[float], float], a: float, b: float, tol: float = 1e-9,
                     max_depth: int = 60) -> float:
    """Adaptive Simpson with absolute tolerance ``tol`` (Richardson-corrected)."""
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(fn, b, a, tol, max_depth)
    budget = [MAX_SUBDIVISIONS]

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = fn(a), fn(b)
    m = 0.5 * (a + b)
    fm = fn(m)
    whole = simpson(fa, fm, fb, a, b)
    # explicit stack instead of recursion: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        budget[0] -= 1
        if depth >= max_depth or abs(delta) <= 15.0 * eps or budget[0] <= 0:
            total += left + right + delta / 15.0
            continue
        stack.append((a, m, fa, flm, fm, left, eps / 2.0, depth + 1))
        stack.append((m, b, fm, frm, fb, right, eps / 2.0, depth + 1))
    if budget[0] <= 0:
        raise QuadratureError("adaptive Simpson exceeded its subdivision cap")
    return total


@lru_cache(maxsize=8)
def graded_rule(levels: int = 40, order: int = 8):
    """Nodes and weights on [0, 1], panels at 2^-k from each end."""
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    cuts = [0.0] + [2.0**-k for k in range(levels, 1, -1)] + [0.5]
    cuts += [1.0 - c for c in reversed(cuts[:-1])]
    nodes, weights = [], []
    for lo, hi in zip(cuts, cuts[1:]):
        nodes.append(lo + (hi - lo) * x)
        weights.append((hi - lo) * w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def graded(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, levels: int = 40,
           order: int = 8) -> float:
    """Integrate a vectorized ``fn`` over [a, b] with the graded rule."""
    if b <= a:
        return 0.0
    s, w = graded_rule(levels, order)
    u = a + (b - a) * s
    return float((b - a) * np.dot(w, fn(u)))


def log_tail(eps: float, a: float, b: float, power: int) -> float:
    """integral_0^eps (a - b ln u)^power du for power 1 or 2."""
    if eps <= 0:
        return 0.0
    L = math.log(eps)
    if power == 1:
        return a * eps - b * eps * (L - 1.0)
    if power == 2:
        return (a * a * eps - 2.0 * a * b * eps * (L - 1.0)
                + b * b * eps * (L * L - 2.0 * L + 2.0))
    raise ValueError("power must be 1 or 2")

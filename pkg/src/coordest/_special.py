"""J(y, p) = integral_y^1 (1 - t)**(p - 1) / t dt, for 0 < y <= 1 and p > 0.

This is the antiderivative behind L* for (a - b*u)**p shaped lower bounds.
Two branches keep full double precision: near y = 1 a hypergeometric form
in (1 - y), which is computed exactly for y >= 1/2; near 0 a log plus power
series that never forms 1 - y.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_EULER = float(np.euler_gamma)


def _series_small(y: np.ndarray, p: float) -> np.ndarray:
    # (1-t)^(p-1) = sum_k a_k t^k, a_k = a_{k-1} (k - p) / k
    out = -np.log(y) - special.digamma(p) - _EULER
    if p == 1.0:
        return out
    acc = np.zeros_like(y)
    a = 1.0
    yk = np.ones_like(y)
    for k in range(1, 200):
        a *= (k - p) / k
        yk = yk * y
        term = a * yk / k
        acc += term
        if a == 0.0 or np.max(np.abs(term)) < 1e-18 * max(1.0, float(np.max(np.abs(acc)))):
            break
    return out - acc


def _series_large(y: np.ndarray, p: float) -> np.ndarray:
    z = 1.0 - y
    return z**p / p * special.hyp2f1(1.0, p, p + 1.0, z)


def jfun(y, p: float):
    """Vectorized J(y, p).  J(1) = 0 and J(y) ~ -ln(y) as y -> 0."""
    if p <= 0:
        raise ValueError("J requires p > 0")
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    if np.any(y_arr <= 0) or np.any(y_arr > 1):
        raise ValueError("J requires 0 < y <= 1")
    out = np.empty_like(y_arr)
    if p == 1.0:
        out = -np.log(y_arr)
    elif p == 2.0:
        out = -np.log(y_arr) - (1.0 - y_arr)
    elif p == 0.5:
        s = np.sqrt(1.0 - y_arr)
        out = np.log1p(s) - np.log(y_arr) + np.log1p(s)  # ln((1+s)^2 / y) = ln((1+s)/(1-s))
    else:
        small = y_arr < 0.5
        if np.any(small):
            out[small] = _series_small(y_arr[small], p)
        if np.any(~small):
            out[~small] = _series_large(y_arr[~small], p)
    return float(out[0]) if scalar else out

"""Analytic pieces of lower-bound curves.

Each form is a smooth non-increasing function g on one segment of (0, 1].
Besides value and derivative a form knows the two integrals that the
estimators need in closed form where one exists:

* ``lstar_increment(a, b)``: integral_a^b -g'(x) / x dx, the continuous part
  of L* (jumps are handled by the curve);
* ``deriv_sq_integral(a, b)``: integral_a^b g'(x)^2 dx, the second moment of
  a hull that follows the curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._special import jfun
from .quadrature import graded


@dataclass(frozen=True)
class Constant:
    c: float
    convex = False
    kind = "constant"

    def value(self, u):
        return np.full(np.shape(u), self.c) if np.ndim(u) else self.c

    def deriv(self, u):
        return np.zeros(np.shape(u)) if np.ndim(u) else 0.0

    def lstar_increment(self, a, b):
        return 0.0

    def deriv_sq_integral(self, a, b):
        return 0.0

    def lstar_profile(self, u, hi, const):
        return np.full(np.shape(u), float(const))

    def lstar_moments(self, a, b, const, hi):
        return const * (b - a), const * const * (b - a)

    def to_json(self):
        return {"form": "constant", "c": self.c}


@dataclass(frozen=True)
class PowerLinear:
    """(alpha - beta*u)^p, clipped at zero."""

    alpha: float
    beta: float
    p: float
    kind = "power"

    @property
    def convex(self) -> bool:
        return self.p > 1.0

    def value(self, u):
        return np.maximum(self.alpha - self.beta * np.asarray(u, dtype=float), 0.0) ** self.p \
            if np.ndim(u) else max(self.alpha - self.beta * u, 0.0) ** self.p

    def deriv(self, u):
        base = np.maximum(self.alpha - self.beta * np.asarray(u, dtype=float), 0.0)
        with np.errstate(divide="ignore"):
            d = -self.p * self.beta * base ** (self.p - 1.0)
        return d if np.ndim(u) else float(d)

    def _y(self, x):
        return np.clip(self.beta * np.asarray(x, dtype=float) / self.alpha, 1e-300, 1.0)

    def lstar_increment(self, a, b):
        if b <= a:
            return 0.0
        k = self.p * self.beta * self.alpha ** (self.p - 1.0)
        return float(k * (jfun(self._y(a), self.p) - jfun(self._y(b), self.p)))

    def lstar_profile(self, u, hi, const):
        k = self.p * self.beta * self.alpha ** (self.p - 1.0)
        return const + k * (jfun(self._y(u), self.p) - jfun(self._y(hi), self.p))

    def lstar_moments(self, a, b, const, hi):
        f1 = graded(lambda u: self.lstar_profile(u, hi, const), a, b)
        f2 = graded(lambda u: self.lstar_profile(u, hi, const) ** 2, a, b)
        return f1, f2

    def deriv_sq_integral(self, a, b):
        if b <= a:
            return 0.0
        p, al, be = self.p, self.alpha, self.beta
        lo_base, hi_base = max(al - be * a, 0.0), max(al - be * b, 0.0)
        e = 2.0 * p - 1.0
        if e == 0.0:
            if hi_base == 0.0:
                return math.inf
            return p * p * be * (math.log(lo_base) - math.log(hi_base))
        if e < 0 and hi_base == 0.0:
            return math.inf
        return p * p * be * (lo_base**e - hi_base**e) / e

    def to_json(self):
        return {"form": "power", "alpha": self.alpha, "beta": self.beta, "p": self.p}


@dataclass(frozen=True)
class TightArc:
    """(1 - (c*u)^(1-p)) / (1-p), the lower bound of the tightness family at v = 0."""

    p: float
    c: float = 1.0
    kind = "tight"

    @property
    def convex(self) -> bool:
        return self.p > 0.0

    def value(self, u):
        uu = np.asarray(u, dtype=float)
        out = (1.0 - np.minimum(self.c * uu, 1.0) ** (1.0 - self.p)) / (1.0 - self.p)
        return out if np.ndim(u) else float(out)

    def deriv(self, u):
        uu = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            d = -(self.c ** (1.0 - self.p)) * uu ** (-self.p)
        return d if np.ndim(u) else float(d)

    def _k(self):
        return self.c ** (1.0 - self.p)

    def lstar_increment(self, a, b):
        if b <= a:
            return 0.0
        if self.p == 0.0:
            return self._k() * (math.log(b) - math.log(a)) if a > 0 else math.inf
        if a == 0:
            return math.inf
        return self._k() * (a ** -self.p - b ** -self.p) / self.p

    def lstar_profile(self, u, hi, const):
        u = np.asarray(u, dtype=float)
        k = self._k()
        with np.errstate(divide="ignore"):
            if self.p == 0.0:
                return const + k * (np.log(hi) - np.log(u))
            return const + k * (u ** -self.p - hi ** -self.p) / self.p

    def lstar_moments(self, a, b, const, hi):
        # profile const + increment(u, hi) written as A + K*phi(u)
        k = self._k()
        if self.p == 0.0:
            A = const + k * math.log(hi)

            def prim1(x):
                return 0.0 if x == 0 else x * math.log(x) - x

            def prim2(x):
                return 0.0 if x == 0 else x * (math.log(x) ** 2 - 2.0 * math.log(x) + 2.0)

            m1 = A * (b - a) - k * (prim1(b) - prim1(a))
            m2 = A * A * (b - a) - 2.0 * A * k * (prim1(b) - prim1(a)) + k * k * (prim2(b) - prim2(a))
            return m1, m2
        p = self.p
        K = k / p
        A = const - K * hi ** -p

        def pw(x, e):
            return 0.0 if x == 0 else x**e

        m1 = A * (b - a) + K * (pw(b, 1 - p) - pw(a, 1 - p)) / (1 - p)
        if 2 * p >= 1:
            m2 = math.inf if a == 0 else (
                A * A * (b - a) + 2 * A * K * (pw(b, 1 - p) - pw(a, 1 - p)) / (1 - p)
                + K * K * (math.log(b / a) if 2 * p == 1 else (pw(b, 1 - 2 * p) - pw(a, 1 - 2 * p)) / (1 - 2 * p)))
        else:
            m2 = (A * A * (b - a) + 2 * A * K * (pw(b, 1 - p) - pw(a, 1 - p)) / (1 - p)
                  + K * K * (pw(b, 1 - 2 * p) - pw(a, 1 - 2 * p)) / (1 - 2 * p))
        return m1, m2

    def deriv_sq_integral(self, a, b):
        if b <= a:
            return 0.0
        k2 = self.c ** (2.0 - 2.0 * self.p)
        e = 1.0 - 2.0 * self.p
        if e <= 0:
            return math.inf if a == 0 else k2 * (math.log(b / a) if e == 0 else (b**e - a**e) / e)
        return k2 * (b**e - a**e) / e

    def to_json(self):
        return {"form": "tight", "p": self.p, "c": self.c}

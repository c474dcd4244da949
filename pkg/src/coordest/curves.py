"""Lower-bound curves, their anchored lower hulls, and optimal ranges.

A curve is non-increasing and left-continuous on (0, 1], stored as analytic
segments on half-open cells (lo, hi].  Hulls are built by a right-to-left
sweep: from the current point take the steepest supporting chord, and when
the current point sits on a convex arc whose tangent is steeper than every
chord, follow the arc until a chord takes over again.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .functions import CustomLowerBound, FunctionSpec
from .sampling import Outcome, ThresholdScheme, sample_vector
from .segments import Constant

ROOT_TOL = 1e-10
_REL = 1e-12


class CurveError(ValueError):
    pass


class NotEstimable(CurveError):
    """No unbiased nonnegative estimator exists for this vector."""


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    form: object

    def value(self, u):
        return self.form.value(u)


@dataclass(frozen=True)
class PiecewiseCurve:
    segments: Tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise CurveError("empty curve")
        for s, t in zip(self.segments, self.segments[1:]):
            if s.hi != t.lo:
                raise CurveError("segments must tile the domain")

    @property
    def lo(self) -> float:
        return self.segments[0].lo

    @property
    def hi(self) -> float:
        return self.segments[-1].hi

    def _index(self, u) -> int:
        segs = self.segments
        k = bisect.bisect_left([t.hi for t in segs], u)
        if k < len(segs) and (u > segs[k].lo or (k == 0 and u == segs[0].lo)):
            return k
        raise CurveError(f"u={u} outside curve domain ({self.lo}, {self.hi}]")

    def __call__(self, u) -> float:
        if np.ndim(u):
            return np.array([self(x) for x in np.ravel(u)]).reshape(np.shape(u))
        return float(self.segments[self._index(u)].value(u))

    def limit_at_zero(self) -> float:
        return float(self.segments[0].value(self.segments[0].lo))

    def jumps(self) -> List[Tuple[float, float]]:
        """(e, curve(e) - curve(e+)) at every interior boundary with a drop."""
        out = []
        for s, t in zip(self.segments, self.segments[1:]):
            d = float(s.value(s.hi)) - float(t.value(t.lo))
            if d > 0:
                out.append((s.hi, d))
        return out

    def restrict(self, a: float) -> "PiecewiseCurve":
        """Same curve on [a, hi]; the first cell keeps its formula."""
        segs = [s for s in self.segments if s.hi > a] or [self.segments[-1]]
        first = segs[0]
        segs[0] = Segment(min(a, first.hi), first.hi, first.form)
        return PiecewiseCurve(tuple(segs))

    def is_zero(self) -> bool:
        return all(isinstance(s.form, Constant) and s.form.c == 0 for s in self.segments)

    # L* pieces: on segment k, L*(u) = offset[k] + increment_k(u, hi_k)

    def lstar_offsets(self) -> List[float]:
        segs = self.segments
        n = len(segs)
        offs = [0.0] * n
        acc = float(segs[-1].value(segs[-1].hi))
        for k in range(n - 1, -1, -1):
            s = segs[k]
            if k < n - 1:
                nxt = segs[k + 1]
                d = float(s.value(s.hi)) - float(nxt.value(nxt.lo))
                if d > 0:
                    acc += d / s.hi
            offs[k] = acc
            acc += s.form.lstar_increment(s.lo, s.hi)
        return offs

    def lstar(self, rho: float) -> float:
        """LB(rho)/rho - integral_rho^1 LB/u^2, summed as jumps plus arc terms."""
        k = self._index(rho)
        offs = self.lstar_offsets()
        s = self.segments[k]
        return offs[k] + s.form.lstar_increment(rho, s.hi)

    def lstar_values(self, u) -> np.ndarray:
        """L* of the data behind this curve at many seeds (vectorized)."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape)
        offs = self.lstar_offsets()
        for s, off in zip(self.segments, offs):
            mask = (u > s.lo) & (u <= s.hi)
            if np.any(mask):
                out[mask] = s.form.lstar_profile(u[mask], s.hi, off)
        return np.maximum(out, 0.0)

    def lstar_moments(self, a: float = 0.0) -> Tuple[float, float]:
        """integral_a^1 of L* and of L*^2 for the data behind this curve."""
        m1 = m2 = 0.0
        for s, off in zip(self.segments, self.lstar_offsets()):
            lo = max(s.lo, a)
            if s.hi <= lo:
                continue
            x1, x2 = s.form.lstar_moments(lo, s.hi, off, s.hi)
            m1 += x1
            m2 += x2
        return m1, m2

    def to_json(self) -> dict:
        return {
            "segments": [
                {"lo": float(s.lo), "hi": float(s.hi), **s.form.to_json()} for s in self.segments
            ]
        }


def _as_curve(pieces) -> PiecewiseCurve:
    return PiecewiseCurve(tuple(Segment(float(lo), float(hi), f) for lo, hi, f in pieces))


def curve_from_data(fspec: FunctionSpec, scheme: ThresholdScheme, v: Sequence[float]) -> PiecewiseCurve:
    """Lower-bound function of ``v`` on (0, 1]."""
    if scheme.r != len(v):
        raise CurveError("vector arity does not match scheme")
    return _as_curve(fspec.pieces(scheme, tuple(v)))


def curve_suffix_from_outcome(fspec: FunctionSpec, outcome: Outcome) -> PiecewiseCurve:
    """Lower-bound function on [rho, 1], computable from the outcome alone.

    Every consistent vector produces the same coarser outcomes, so the
    representative (unsampled entries set to zero) gives the suffix.
    """
    return curve_from_data(fspec, outcome.scheme, outcome.representative()).restrict(outcome.rho)


# hull


@dataclass(frozen=True)
class HullPiece:
    """Hull on (lo, hi]: a chord with estimate ``slope`` or an arc of ``form``."""

    lo: float
    hi: float
    y_lo: float
    y_hi: float
    slope: float = math.nan
    form: object = None

    @property
    def is_arc(self) -> bool:
        return self.form is not None

    def estimate(self, u):
        if self.form is None:
            return self.slope + 0.0 * np.asarray(u, dtype=float) if np.ndim(u) else self.slope
        return -self.form.deriv(u)

    def second_moment(self) -> float:
        if self.form is None:
            return self.slope * self.slope * (self.hi - self.lo)
        return self.form.deriv_sq_integral(self.lo, self.hi)

    def sup_estimate(self) -> float:
        if self.form is None:
            return self.slope
        return float(-self.form.deriv(self.lo)) if self.lo > 0 else float(-self.form.deriv(0.0))


@dataclass(frozen=True)
class Hull:
    rho: float
    M: float
    pieces: Tuple[HullPiece, ...]  # ascending in u

    def _piece(self, u) -> HullPiece:
        if not 0 < u <= self.rho:
            raise CurveError(f"u={u} outside hull domain (0, {self.rho}]")
        his = [p.hi for p in self.pieces]
        return self.pieces[bisect.bisect_left(his, u)]

    def estimate(self, u) -> float:
        """Negated slope at u (left derivative), the optimal estimate there."""
        return float(self._piece(u).estimate(u))

    def value(self, u) -> float:
        if u >= self.rho:
            return self.M
        pc = self._piece(u) if u > 0 else self.pieces[0]
        if pc.form is None:
            return pc.y_hi + pc.slope * (pc.hi - u)
        return float(pc.form.value(u))

    def limit_at_zero(self) -> float:
        return self.pieces[0].y_lo

    def integral(self) -> float:
        """integral_0^rho of the estimate = H(0+) - M."""
        return self.pieces[0].y_lo - self.M

    def second_moment(self) -> float:
        return float(sum(p.second_moment() for p in self.pieces))

    def breakpoints(self) -> List[float]:
        return [p.lo for p in self.pieces]

    def to_json(self) -> dict:
        return {
            "anchor": [self.rho, self.M],
            "pieces": [
                {"lo": p.lo, "hi": p.hi, "y_lo": p.y_lo, "y_hi": p.y_hi,
                 **({"arc": p.form.to_json()} if p.form is not None else {"slope": p.slope})}
                for p in self.pieces
            ],
        }


@dataclass
class _Cand:
    lam: float
    eta: float
    y: float
    follow: object = None  # form being followed
    seg: int = -1


def _better(c: _Cand, best: Optional[_Cand]) -> bool:
    if best is None:
        return True
    tol = _REL * max(1.0, abs(best.lam))
    if c.lam < best.lam - tol:
        return True
    return abs(c.lam - best.lam) <= tol and c.eta < best.eta


def _best_chord(segs: Sequence[Segment], x: float, y: float, allow_follow: bool,
                upto: Optional[int] = None) -> _Cand:
    """Smallest (LB(eta) - y) / (x - eta) over eta < x, plus the arc tangent at x."""
    best = None
    n = len(segs) if upto is None else upto
    for k in range(n):
        s = segs[k]
        if s.lo >= x:
            break
        f = s.form
        a, b = s.lo, min(s.hi, x)
        ga = float(f.value(a))
        c = _Cand((ga - y) / (x - a), a, ga, seg=k)
        if _better(c, best):
            best = c
        if isinstance(f, Constant):
            continue
        if s.hi < x:
            gb = float(f.value(b))
            c = _Cand((gb - y) / (x - b), b, gb, seg=k)
            if _better(c, best):
                best = c
        if not f.convex:
            continue
        gx = float(f.value(x)) if s.hi >= x else None
        on_arc = gx is not None and abs(gx - y) <= 1e-12 * max(1.0, abs(y))
        if on_arc:
            if allow_follow:
                c = _Cand(float(-f.deriv(x)), x, y, follow=f, seg=k)
                if _better(c, best):
                    best = c
            continue

        def phi(eta):
            return float(f.deriv(eta)) * (x - eta) + float(f.value(eta)) - y

        lo_e = max(a, 1e-300)
        if lo_e >= b:
            continue
        p_lo, p_hi = phi(lo_e), phi(b)
        if p_lo < 0 < p_hi:
            eta = brentq(phi, lo_e, b, xtol=ROOT_TOL * 1e-3, rtol=4 * np.finfo(float).eps)
            ge = float(f.value(eta))
            c = _Cand((ge - y) / (x - eta), eta, ge, seg=k)
            if _better(c, best):
                best = c
    if best is None:
        raise CurveError("no support point to the left of x")
    best.lam = max(best.lam, 0.0)
    return best


def _check_anchor(curve: PiecewiseCurve, rho: float, M: float) -> float:
    lb = curve(rho)
    tol = 1e-9 * max(1.0, abs(lb))
    if M < -tol or M > lb + tol:
        raise CurveError(f"anchor M={M} outside [0, curve(rho)={lb}]")
    return min(max(M, 0.0), lb)


def lower_hull(curve: PiecewiseCurve, rho: float = 1.0, M: float = 0.0) -> Hull:
    """Greatest convex minorant of the curve on (0, rho) passing through (rho, M)."""
    if not 0 < rho <= curve.hi:
        raise CurveError("anchor seed outside the curve domain")
    M = _check_anchor(curve, rho, M)
    segs = [s for s in curve.segments if s.lo < rho]
    pieces: List[HullPiece] = []
    x, y = rho, M
    allow = True
    for _ in range(100000):
        if x <= 0:
            break
        c = _best_chord(segs, x, y, allow)
        if c.follow is None:
            pieces.append(HullPiece(c.eta, x, c.y, y, slope=c.lam))
            x, y, allow = c.eta, c.y, True
            continue
        f, k = c.follow, c.seg
        a = segs[k].lo

        def excess(xi):
            gx = float(f.value(xi))
            return _best_chord(segs, xi, gx, False, upto=k).lam - float(-f.deriv(xi))

        if k == 0 or excess(a if a > 0 else 1e-300) >= 0:
            xi, allow = a, True
        else:
            lo_x = a if a > 0 else 1e-300
            if excess(x) < 0:
                xi = x
            else:
                xi = brentq(excess, lo_x, x, xtol=ROOT_TOL * 1e-3, rtol=4 * np.finfo(float).eps)
            allow = False
        if xi < x:
            pieces.append(HullPiece(xi, x, float(f.value(xi)), y, form=f))
        y = float(f.value(xi))
        x = xi
    else:
        raise CurveError("hull sweep did not terminate")
    pieces.reverse()
    return Hull(rho, M, tuple(pieces))


def lambda_value(curve: PiecewiseCurve, rho: float, M: float) -> float:
    """inf over eta < rho of (curve(eta) - M) / (rho - eta)."""
    M = _check_anchor(curve, rho, M)
    segs = [s for s in curve.segments if s.lo < rho]
    return _best_chord(segs, rho, M, True).lam


@dataclass(frozen=True)
class OptimalRange:
    lambda_L: float
    lambda_U: float

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.lambda_U)

    def contains(self, x: float, tol: float = 1e-9) -> bool:
        scale = max(1.0, abs(x))
        return self.lambda_L - tol * scale <= x <= self.lambda_U + tol * scale


def lambda_bounds(fspec: FunctionSpec, outcome: Outcome, M: float) -> OptimalRange:
    lb = fspec.lower_bound(outcome)
    tol = 1e-9 * max(1.0, abs(lb))
    if M > lb + tol or M < -tol:
        raise CurveError(f"M={M} outside [0, lower bound {lb}]")
    M = min(max(M, 0.0), lb)
    lam_l = (lb - M) / outcome.rho
    z = fspec.witness(outcome)
    lam_u = lambda_value(curve_from_data(fspec, outcome.scheme, z), outcome.rho, M)
    return OptimalRange(lam_l, max(lam_u, lam_l))


def v_optimal(fspec: FunctionSpec, scheme: ThresholdScheme, v: Sequence[float]) -> Hull:
    """Hull of the lower-bound curve anchored at (1, 0); its negated slope is the
    minimum-variance unbiased nonnegative estimate for ``v``."""
    curve = curve_from_data(fspec, scheme, v)
    f = fspec.value(v)
    if abs(curve.limit_at_zero() - f) > 1e-9 * max(1.0, abs(f)):
        raise NotEstimable(f"lower bound tends to {curve.limit_at_zero()} but f(v) = {f}")
    return lower_hull(curve, 1.0, 0.0)


# existence checks

UNKNOWN = "unknown"


def existence_checks(fspec: FunctionSpec, scheme: ThresholdScheme, v: Sequence[float]) -> Dict[str, object]:
    """estimable / finite_variance / bounded for the vector ``v``.

    Analytic for the built-in kinds.  Custom kinds are probed at u = 2^-k
    and may answer ``"unknown"``.
    """
    if isinstance(fspec, CustomLowerBound):
        return _probe_checks(fspec, scheme, v)
    curve = curve_from_data(fspec, scheme, v)
    f = fspec.value(v)
    estimable = abs(curve.limit_at_zero() - f) <= 1e-9 * max(1.0, abs(f))
    if not estimable:
        return {"estimable": False, "finite_variance": False, "bounded": False}
    hull = lower_hull(curve, 1.0, 0.0)
    return {
        "estimable": True,
        "finite_variance": math.isfinite(hull.second_moment()),
        "bounded": all(math.isfinite(p.sup_estimate()) for p in hull.pieces),
    }


def _richardson(vals: Sequence[float]) -> Tuple[float, float]:
    """Limit estimate assuming first-order error in h = 2^-k; returns (limit, spread)."""
    r = [2 * b - a for a, b in zip(vals, vals[1:])]
    return r[-1], abs(r[-1] - r[-2])


def _probe_checks(fspec, scheme, v, kmin: int = 8, kmax: int = 30) -> Dict[str, object]:
    us = [2.0**-k for k in range(kmin, kmax + 1)]
    lbs = [fspec.lower_bound(sample_vector(v, u, scheme)) for u in us]
    f = fspec.value(v)
    lim, spread = _richardson(lbs)
    tol = 1e-6 * max(1.0, abs(f))
    if abs(lim - f) <= tol and spread <= tol:
        estimable = True
    elif abs(lbs[-1] - f) > 10 * max(tol, spread) and abs(lbs[-1] - lbs[-3]) <= tol:
        estimable = False
    else:
        estimable = UNKNOWN
    # bounded: (f - LB(u)) / u must stay finite
    q = [(f - lb) / u for lb, u in zip(lbs, us)]
    if estimable is False:
        return {"estimable": False, "finite_variance": False, "bounded": False}
    grow = [abs(q[i + 2]) / max(abs(q[i]), 1e-300) for i in range(len(q) - 2)]
    if grow[-1] > 10 and grow[-2] > 10:
        bounded = False
    elif abs(q[-1] - q[-3]) <= 1e-3 * max(1.0, abs(q[-1])):
        bounded = True
    else:
        bounded = UNKNOWN
    # finite variance: u * slope(u)^2 must vanish; slope from the tabulated hull
    try:
        hull = lower_hull(curve_from_data(fspec, scheme, v), 1.0, 0.0)
        w = [u * hull.estimate(u) ** 2 for u in us]
        gw = [w[i + 2] / max(w[i], 1e-300) for i in range(len(w) - 2)]
        if bounded is True or all(x <= 1e-12 for x in w[-3:]):
            finite = True
        elif gw[-1] > 10 and gw[-2] > 10:
            finite = False
        elif w[-1] <= w[-3]:
            finite = True
        else:
            finite = UNKNOWN
    except CurveError:
        finite = UNKNOWN
    return {"estimable": estimable, "finite_variance": finite, "bounded": bounded}

"""L*, U*, Horvitz-Thompson and v-optimal estimates for one sampled item.

All estimators map an outcome to a nonnegative number.  L* and U* sit at the
two ends of the optimal range: L* solves the lower end with equality, which
gives a closed form in the lower-bound curve, and U* the upper end, which is
solved by walking the anchored hull of the witness vector from u = 1 down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .curves import (
    CurveError,
    Hull,
    HullPiece,
    curve_from_data,
    curve_suffix_from_outcome,
    lambda_value,
    lower_hull,
    v_optimal,
)
from .functions import CustomLowerBound, FunctionSpec
from .segments import Constant, PowerLinear
from .quadrature import adaptive_simpson
from .sampling import Outcome, ThresholdScheme, sample_vector

LSTAR = "lstar"
USTAR = "ustar"
HT = "ht"
KINDS = (LSTAR, USTAR, HT)

USTAR_GRID_POINTS = 4096
USTAR_GRID_TOL = 1e-6


class EstimatorError(ValueError):
    """Estimator not applicable to this input."""


@dataclass(frozen=True)
class VOptOracle:
    """Minimum-variance estimator for one known vector (an oracle, not a legal estimator)."""

    v: Tuple[float, ...]


@dataclass(frozen=True)
class OrderOptimal:
    table: object


# L*


def lstar_estimate(fspec: FunctionSpec, outcome: Outcome) -> float:
    if isinstance(fspec, CustomLowerBound):
        return _lstar_quadrature(fspec, outcome)
    return max(curve_suffix_from_outcome(fspec, outcome).lstar(outcome.rho), 0.0)


def _lstar_quadrature(fspec: FunctionSpec, outcome: Outcome, tol: float = 1e-9) -> float:
    rho = outcome.rho
    v0 = outcome.representative()
    scheme = outcome.scheme

    def lb(u):
        return fspec.lower_bound(sample_vector(v0, u, scheme))

    cuts = sorted({c for c in _crossings(scheme, v0) if rho < c < 1} | {rho, 1.0})
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        # left-continuous pieces: nudge the right end inside the cell
        total += adaptive_simpson(lambda u: lb(u) / (u * u), a, b, tol / len(cuts))
    return max(lb(rho) / rho - total, 0.0)


def _crossings(scheme: ThresholdScheme, v) -> List[float]:
    pts = set(float(x) for x in scheme.event_seeds())
    if scheme.kind != "full":
        for i, x in enumerate(v):
            pts.add(float(scheme.crossing(i, x)))
    return sorted(pts)


# U*


def _interval_edges(scheme: ThresholdScheme, v, floor: float = 0.0) -> List[float]:
    """Descending seeds 1 = e0 > e1 > ... where the sample of v changes."""
    pts = [c for c in _crossings(scheme, v) if floor < c < 1]
    return [1.0] + sorted(set(pts), reverse=True)


def ustar_profile(fspec: FunctionSpec, scheme: ThresholdScheme, v: Sequence[float],
                  down_to: float = 0.0) -> List[HullPiece]:
    """U* for the data ``v`` on (down_to, 1] as hull pieces, ascending in u.

    On each cell where the sample of ``v`` is constant, U* follows the hull of
    the witness's lower-bound curve anchored at the running integral M.
    """
    v = tuple(v)
    edges = _interval_edges(scheme, v)
    pieces: List[HullPiece] = []
    M = 0.0
    cache: Dict[Tuple, object] = {}
    for k, hi in enumerate(edges):
        lo = edges[k + 1] if k + 1 < len(edges) else 0.0
        outcome = sample_vector(v, hi, scheme)
        z = tuple(fspec.witness(outcome))
        if z not in cache:
            cache[z] = curve_from_data(fspec, scheme, z)
        curve = cache[z]
        Mc = min(M, curve(hi))
        hull = lower_hull(curve, hi, Mc)
        for pc in hull.pieces:
            if pc.hi <= lo:
                continue
            if pc.lo < lo:
                y_lo = hull.value(lo)
                pc = HullPiece(lo, pc.hi, y_lo, pc.y_hi, pc.slope, pc.form)
            pieces.append(pc)
        M = hull.value(lo) if lo > 0 else hull.limit_at_zero()
        # cells are (lo, hi]: a seed equal to lo lives in the next cell
        if lo < down_to:
            break
    pieces.sort(key=lambda p: p.lo)
    return pieces


def _profile_at(pieces: Sequence[HullPiece], u: float) -> float:
    for pc in pieces:
        if pc.lo < u <= pc.hi:
            return float(pc.estimate(u))
    raise EstimatorError(f"seed {u} not covered")


def ustar_estimate(fspec: FunctionSpec, outcome: Outcome) -> float:
    if isinstance(fspec, CustomLowerBound):
        return ustar_grid(fspec, outcome)
    v0 = outcome.representative()
    val = _profile_at(ustar_profile(fspec, outcome.scheme, v0, down_to=outcome.rho), outcome.rho)
    if not math.isfinite(val):
        raise EstimatorError("upper end of the optimal range is unbounded here")
    return max(val, 0.0)


def _chord_fn(curve):
    """lambda(u, M) for a fixed curve; vectorized when every piece is linear or constant."""
    segs = curve.segments
    linear = all(isinstance(sg.form, Constant) or (isinstance(sg.form, PowerLinear) and sg.form.p == 1.0)
                 for sg in segs)
    if not linear:
        return lambda u, M: lambda_value(curve, u, min(M, curve(u)))
    a = np.array([sg.lo for sg in segs])
    b = np.array([sg.hi for sg in segs])
    gl = np.array([float(sg.form.value(math.nextafter(sg.lo, sg.hi))) for sg in segs])
    gr = np.array([float(sg.form.value(sg.hi)) for sg in segs])
    slope = (gl - gr) / (b - a)

    def lam(u, M):
        # on a linear piece the chord slope is extreme at an end point
        k = int(np.searchsorted(b, u, side="left"))
        gu = gl[k] - slope[k] * (u - a[k])
        M = min(M, gu)
        best = np.min((gl[: k + 1] - M) / (u - a[: k + 1]))
        if k:
            best = min(best, np.min((gr[:k] - M) / (u - b[:k])))
        if M >= gu - 1e-15 * max(1.0, abs(gu)):
            best = min(best, slope[k])
        return max(float(best), 0.0)

    return lam


def ustar_grid(fspec: FunctionSpec, outcome: Outcome, points: int = USTAR_GRID_POINTS,
               tol: float = USTAR_GRID_TOL, max_doublings: int = 4) -> float:
    """U* by a forward sweep from u = 1 down to rho on a geometric grid.

    Between consecutive crossings of the data the outcome, and so the
    witness curve, is fixed; each such cell is swept with the trapezoid
    rule (predictor-corrector on the running integral M).  The grid
    doubles until two sweeps agree within ``tol`` at every shared node.
    """
    v0 = outcome.representative()
    scheme = outcome.scheme
    rho = outcome.rho
    edges = [e for e in _interval_edges(scheme, v0) if e > rho] + [rho]
    cells = []
    for hi, lo in zip(edges, edges[1:]):
        z = tuple(fspec.witness(sample_vector(v0, hi, scheme)))
        cells.append((hi, lo, _chord_fn(curve_from_data(fspec, scheme, z))))
    span = math.log(1.0 / rho) if rho < 1 else 0.0

    def sweep(n):
        out = []
        M = 0.0
        val = 0.0
        for hi, lo, lam in cells:
            k = max(2, int(math.ceil(n * math.log(hi / lo) / span)) if span else 2)
            grid = np.geomspace(hi, lo, k)
            prev = lam(grid[0], M)
            out.append(prev)
            for j in range(1, k):
                du = grid[j - 1] - grid[j]
                pred = lam(grid[j], M + prev * du)
                M = M + 0.5 * (prev + pred) * du
                prev = lam(grid[j], M)
                out.append(prev)
            val = prev
        return val, np.array(out)

    if rho >= 1 or not cells:
        return max(float(cells[0][2](1.0, 0.0)) if cells else 0.0, 0.0)
    prev_val, _ = sweep(points)
    n = points
    for _ in range(max_doublings):
        n *= 2
        val, _ = sweep(n)
        if abs(val - prev_val) < tol:
            return max(val, 0.0)
        prev_val = val
    raise EstimatorError("U* grid sweep did not converge")


# Horvitz-Thompson


def ht_applicable(fspec: FunctionSpec, scheme: ThresholdScheme, v: Sequence[float]) -> bool:
    return fspec.value(v) == 0 or fspec.reveal_probability(scheme, v) > 0


def ht_estimate(fspec: FunctionSpec, scheme: Optional[ThresholdScheme], outcome: Outcome) -> float:
    """f/p on outcomes that reveal f, else 0."""
    scheme = scheme or outcome.scheme
    if not fspec.revealed(outcome):
        return 0.0
    v = outcome.representative()
    f = fspec.value(v)
    if f == 0:
        return 0.0
    p = fspec.reveal_probability(scheme, v)
    if p <= 0:
        raise EstimatorError("zero reveal probability")
    return f / p


def ht_may_be_inapplicable(fspec: FunctionSpec, outcome: Outcome) -> bool:
    """True when some consistent vector has positive f but zero reveal probability."""
    if fspec.revealed(outcome):
        return False
    try:
        z = fspec.witness(outcome)
    except Exception:
        return False
    return fspec.value(z) > 0 and fspec.reveal_probability(outcome.scheme, z) == 0


# dispatch


def voptimal_estimate(fspec: FunctionSpec, v: Sequence[float], outcome: Outcome) -> float:
    if not outcome.consistent_with(v):
        raise EstimatorError("oracle vector is not consistent with the outcome")
    return v_optimal(fspec, outcome.scheme, v).estimate(outcome.rho)


def estimate(kind, fspec: FunctionSpec, outcome: Outcome) -> float:
    if kind == LSTAR:
        return lstar_estimate(fspec, outcome)
    if kind == USTAR:
        return ustar_estimate(fspec, outcome)
    if kind == HT:
        return ht_estimate(fspec, outcome.scheme, outcome)
    if isinstance(kind, VOptOracle):
        return voptimal_estimate(fspec, kind.v, outcome)
    if isinstance(kind, OrderOptimal):
        from .order_optimal import order_optimal_estimate

        return order_optimal_estimate(kind.table, outcome)
    raise EstimatorError(f"unknown estimator {kind!r}")

"""Numerical checks of estimator properties.

Moments integrate an estimator over the seed u in (0, 1] for a fixed data
vector.  Built-in kinds use per-segment closed forms where the estimate is
piecewise analytic and graded Gauss-Legendre otherwise; integration always
splits at the seeds where the sample of the vector changes.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .curves import (
    CurveError,
    NotEstimable,
    curve_from_data,
    lambda_bounds,
    lower_hull,
    v_optimal,
)
from .estimators import (
    HT,
    LSTAR,
    USTAR,
    EstimatorError,
    OrderOptimal,
    VOptOracle,
    estimate,
    ht_applicable,
    lstar_estimate,
    ustar_profile,
)
from .functions import CustomLowerBound, FunctionSpec, TightFamily
from .quadrature import adaptive_simpson
from .sampling import ThresholdScheme, sample_vector, seed_from_key


@dataclass
class MomentReport:
    expectation: float
    second_moment: float
    variance: float
    f_value: float
    quadrature_error_bound: float = 0.0
    divergent: bool = False


@dataclass
class RatioReport:
    v: Tuple
    estimator_second_moment: float
    optimal_second_moment: float
    ratio: float


def _report(e1, e2, f, err=0.0) -> MomentReport:
    div = not math.isfinite(e2)
    return MomentReport(e1, e2, math.inf if div else e2 - e1 * e1, f, err, div)


def moments(kind, fspec: FunctionSpec, scheme: ThresholdScheme, v: Sequence[float],
            tol: float = 1e-9) -> MomentReport:
    """Expectation and second moment of an estimator over u ~ U(0, 1] for data v."""
    v = tuple(v)
    f = fspec.value(v)
    if isinstance(kind, VOptOracle):
        if tuple(kind.v) != v:
            raise EstimatorError("v-optimal oracle evaluated on a different vector")
        hull = v_optimal(fspec, scheme, v)
        return _report(hull.integral(), hull.second_moment(), f)
    if kind == HT:
        if f == 0:
            return _report(0.0, 0.0, f)
        if not ht_applicable(fspec, scheme, v):
            raise EstimatorError("Horvitz-Thompson not applicable: zero reveal probability")
        p = fspec.reveal_probability(scheme, v)
        return _report(f, f * f / p, f)
    if kind == USTAR and not isinstance(fspec, CustomLowerBound):
        pieces = ustar_profile(fspec, scheme, v)
        e1 = sum(pc.y_lo - pc.y_hi for pc in pieces)
        e2 = sum(pc.second_moment() for pc in pieces)
        return _report(e1, e2, f)
    if kind == LSTAR and not isinstance(fspec, CustomLowerBound):
        e1, e2 = curve_from_data(fspec, scheme, v).lstar_moments()
        return _report(e1, e2, f)
    if isinstance(kind, OrderOptimal):
        cells = kind.table.estimates_for(v)
        e1 = sum(float((hi - lo) * val) for lo, hi, val in cells)
        e2 = sum(float((hi - lo) * val * val) for lo, hi, val in cells)
        return _report(e1, e2, f)
    return _generic_moments(kind, fspec, scheme, v, tol)


def _generic_moments(kind, fspec, scheme, v, tol) -> MomentReport:
    def est(u):
        return estimate(kind, fspec, sample_vector(v, u, scheme))

    cuts = {0.0, 1.0}
    if scheme.kind != "full":
        cuts |= {float(scheme.crossing(i, x)) for i, x in enumerate(v)}
    cuts |= {float(e) for e in scheme.event_seeds()}
    cuts = sorted(c for c in cuts if 0 <= c <= 1)
    e1 = e2 = 0.0
    lo_floor = 1e-12
    for a, b in zip(cuts, cuts[1:]):
        a = max(a, lo_floor)
        if b <= a:
            continue
        e1 += adaptive_simpson(est, a, b, tol)
        e2 += adaptive_simpson(lambda u: est(u) ** 2, a, b, tol)
    return _report(e1, e2, fspec.value(v), err=tol * 2 * len(cuts))


def competitive_ratio(kind, fspec: FunctionSpec, scheme: ThresholdScheme, v: Sequence[float]) -> RatioReport:
    v = tuple(v)
    if fspec.value(v) == 0:
        return RatioReport(v, 0.0, 0.0, 1.0)
    est = moments(kind, fspec, scheme, v).second_moment
    opt = moments(VOptOracle(v), fspec, scheme, v).second_moment
    if opt == 0:
        raise EstimatorError("optimal second moment is zero for a vector with positive f")
    return RatioReport(v, est, opt, est / opt)


def tightness_family(p: float, numeric: bool = True) -> Dict[str, float]:
    """Closed-form moments at v = 0 of the family whose L* ratio tends to 4.

    With ``numeric`` the closed forms are cross-checked against direct
    quadrature of the estimates (scipy, algebraic endpoint weight).
    """
    if not 0 <= p < 0.5:
        raise ValueError("p must lie in [0, 0.5)")
    out = {
        "p": p,
        "opt_sm": 1.0 / (1.0 - 2.0 * p),
        "lstar_sm": 2.0 / ((1.0 - 2.0 * p) * (1.0 - p)),
        "ratio": 2.0 / (1.0 - p),
    }
    if not numeric:
        return out
    fs = TightFamily(p)
    scheme = ThresholdScheme.pps([1.0])
    v = (0.0,)
    hull = v_optimal(fs, scheme, v)

    def opt_sq(u):
        u = max(u, 1e-300)
        return hull.estimate(u) ** 2 * u ** (2 * p)

    def lstar_sq(u):
        u = max(u, 1e-300)
        return lstar_estimate(fs, sample_vector(v, u, scheme)) ** 2 * u ** (2 * p)

    kw = dict(weight="alg", wvar=(-2 * p, 0.0), epsabs=1e-12, epsrel=1e-10, limit=200)
    if p == 0:
        kw = dict(epsabs=1e-12, epsrel=1e-10, limit=200)
    out["opt_sm_numeric"] = integrate.quad(opt_sq, 0.0, 1.0, **kw)[0]
    out["lstar_sm_numeric"] = integrate.quad(lstar_sq, 0.0, 1.0, **kw)[0]
    out["ratio_numeric"] = out["lstar_sm_numeric"] / out["opt_sm_numeric"]
    out["lstar_sm_segments"] = moments(LSTAR, fs, scheme, v).second_moment
    out["opt_sm_segments"] = moments(VOptOracle(v), fs, scheme, v).second_moment
    return out


# property suite


@dataclass
class SuiteConfig:
    fspec: FunctionSpec
    scheme: ThresholdScheme
    vectors: Sequence[Tuple]
    seeds: Sequence[float] = (0.05, 0.25, 0.5, 0.75, 0.95)
    unbiased_tol: float = 1e-6
    range_tol: float = 1e-7
    ratio_bound: float = 4.0 + 1e-3
    var_tol: float = 1e-9
    estimators: Sequence[str] = (LSTAR, USTAR, HT, "vopt")
    check_range: bool = True


@dataclass
class SuiteReport:
    checked: Dict[str, int] = field(default_factory=dict)
    violations: List[Dict] = field(default_factory=list)
    max_ratio: float = 1.0
    argmax_ratio: Optional[Tuple] = None
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations

    def count(self, name: str) -> None:
        self.checked[name] = self.checked.get(name, 0) + 1

    def fail(self, name: str, **info) -> None:
        self.violations.append({"check": name, **info})

    def to_json(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def text(self) -> str:
        lines = [f"{'check':<22}{'points':>10}{'violations':>12}"]
        for name, n in sorted(self.checked.items()):
            bad = sum(1 for x in self.violations if x["check"] == name)
            lines.append(f"{name:<22}{n:>10}{bad:>12}")
        lines.append(f"max L* ratio {self.max_ratio:.6f} at {self.argmax_ratio}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def property_suite(cfg: SuiteConfig) -> SuiteReport:
    t0 = time.perf_counter()
    rep = SuiteReport()
    fs, scheme = cfg.fspec, cfg.scheme
    for v in cfg.vectors:
        v = tuple(float(x) for x in v)
        f = fs.value(v)
        curve = curve_from_data(fs, scheme, v)
        if curve.is_zero() and f == 0:
            # every unbiased nonnegative estimator is identically 0 here
            for name in ("unbiased", "nonnegative", "monotone", "in_range", "ratio"):
                rep.count(name)
            continue
        try:
            hull = lower_hull(curve, 1.0, 0.0)
        except CurveError as exc:
            rep.fail("hull", v=v, error=str(exc))
            continue
        if abs(curve.limit_at_zero() - f) > 1e-9 * max(1.0, f):
            rep.count("estimable")
            continue
        # unbiasedness and moments
        lstar_m = curve.lstar_moments()
        mom = {LSTAR: lstar_m, "vopt": (hull.integral(), hull.second_moment())}
        if USTAR in cfg.estimators:
            upieces = ustar_profile(fs, scheme, v)
            mom[USTAR] = (sum(p.y_lo - p.y_hi for p in upieces), sum(p.second_moment() for p in upieces))
        ht_ok = HT in cfg.estimators and ht_applicable(fs, scheme, v)
        if ht_ok:
            pr = fs.reveal_probability(scheme, v)
            # integrate the actual estimator: constant f/p on (0, p]
            o = sample_vector(v, pr, scheme)
            val = estimate(HT, fs, o)
            mom[HT] = (val * pr, val * val * pr)
        for name, (e1, _) in mom.items():
            if name not in cfg.estimators:
                continue
            rep.count("unbiased")
            if not _close(e1, f, cfg.unbiased_tol):
                rep.fail("unbiased", v=v, estimator=name, expectation=e1, f=f)
        # competitive ratio of L*
        rep.count("ratio")
        opt2 = mom["vopt"][1]
        ratio = lstar_m[1] / opt2 if opt2 > 0 else 1.0
        if ratio > rep.max_ratio:
            rep.max_ratio, rep.argmax_ratio = ratio, v
        if ratio > cfg.ratio_bound:
            rep.fail("ratio", v=v, ratio=ratio)
        if ht_ok:
            rep.count("ht_domination")
            var_l = lstar_m[1] - lstar_m[0] ** 2
            var_h = mom[HT][1] - mom[HT][0] ** 2
            if var_l > var_h + cfg.var_tol * max(1.0, var_h):
                rep.fail("ht_domination", v=v, var_lstar=var_l, var_ht=var_h)
        # pointwise checks along the seed grid
        seeds = sorted(cfg.seeds)
        lvals = curve.lstar_values(np.asarray(seeds))
        rep.count("monotone")
        if np.any(np.diff(lvals) > 1e-12 * max(1.0, float(np.max(lvals)))):
            rep.fail("monotone", v=v, values=lvals.tolist())
        rep.count("nonnegative")
        if np.any(lvals < 0):
            rep.fail("nonnegative", v=v)
        if not cfg.check_range:
            continue
        for u, lv in zip(seeds, lvals):
            o = sample_vector(v, u, scheme)
            rep.count("in_range")
            try:
                m_l = curve.lstar_moments(u)[0]
                rng = lambda_bounds(fs, o, min(m_l, fs.lower_bound(o)))
                ok = rng.contains(lv, cfg.range_tol) and _close(lv, rng.lambda_L, cfg.range_tol)
                if USTAR in cfg.estimators:
                    m_u = sum(_piece_mass(p, u) for p in upieces)
                    uv = _profile_value(upieces, u)
                    rng_u = lambda_bounds(fs, o, min(m_u, fs.lower_bound(o)))
                    ok = ok and rng_u.contains(uv, cfg.range_tol) and _close(uv, rng_u.lambda_U, cfg.range_tol)
                    if uv < 0:
                        rep.fail("nonnegative", v=v, u=u, estimator=USTAR)
                if not ok:
                    rep.fail("in_range", v=v, u=u, lstar=float(lv), range=(rng.lambda_L, rng.lambda_U))
            except (CurveError, EstimatorError) as exc:
                rep.fail("in_range", v=v, u=u, error=str(exc))
    rep.seconds = time.perf_counter() - t0
    return rep


def _piece_mass(pc, a: float) -> float:
    """integral over (max(lo, a), hi] of a hull piece's estimate."""
    if pc.hi <= a:
        return 0.0
    if pc.lo >= a:
        return pc.y_lo - pc.y_hi
    y_a = pc.y_hi + pc.slope * (pc.hi - a) if pc.form is None else float(pc.form.value(a))
    return y_a - pc.y_hi


def _profile_value(pieces, u: float) -> float:
    for pc in pieces:
        if pc.lo < u <= pc.hi:
            return float(pc.estimate(u))
    raise EstimatorError(f"seed {u} not covered")


def grid_vectors(n: int, lo: float = 0.0, hi: float = 1.0) -> List[Tuple[float, float]]:
    xs = np.linspace(lo, hi, n)
    return [(float(a), float(b)) for a in xs for b in xs]


# aggregate experiments


def _item_estimates(kind, fspec, scheme, v, seeds: np.ndarray) -> np.ndarray:
    """Estimates for one item at many seeds."""
    if kind == LSTAR and not isinstance(fspec, CustomLowerBound):
        return curve_from_data(fspec, scheme, v).lstar_values(seeds)
    return np.array([estimate(kind, fspec, sample_vector(v, float(u), scheme)) for u in seeds])


@dataclass
class AggregateRow:
    size: int
    blocks: int
    truth: float
    mean_estimate: float
    std_error: float
    rel_rmse: float


def aggregate_error_experiment(matrix: Mapping[str, Sequence[float]], fspec: FunctionSpec, kind,
                               sizes: Sequence[int], trials: int, scheme: ThresholdScheme,
                               salt_prefix: str = "trial") -> List[AggregateRow]:
    """Monte Carlo over salts of sum estimates on domains of several sizes.

    Items are split into disjoint blocks of each size; relative RMSE pools
    all blocks and trials.  Trial t hashes seeds with salt f"{prefix}{t}".
    """
    keys = list(matrix)
    n = len(keys)
    seeds = np.array([[seed_from_key(k, f"{salt_prefix}{t}") for t in range(trials)] for k in keys])
    est = np.empty((n, trials))
    fvals = np.empty(n)
    for i, k in enumerate(keys):
        v = tuple(matrix[k])
        fvals[i] = fspec.value(v)
        est[i] = _item_estimates(kind, fspec, scheme, v, seeds[i])
    rows = []
    for size in sizes:
        nb = n // size
        if nb == 0:
            continue
        sums = est[: nb * size].reshape(nb, size, trials).sum(axis=1)
        truth = fvals[: nb * size].reshape(nb, size).sum(axis=1)
        mask = truth > 0
        if not mask.any():
            rows.append(AggregateRow(size, nb, 0.0, float(sums.mean()), 0.0, 0.0))
            continue
        rel = (sums[mask] - truth[mask, None]) / truth[mask, None]
        total_truth = float(truth.sum())
        mean = float(sums.sum(axis=0).mean())
        se = float(sums.sum(axis=0).std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        rows.append(AggregateRow(size, nb, total_truth, mean, se, float(np.sqrt(np.mean(rel**2)))))
    return rows


def synthetic_matrix(n: int, seed: int = 7) -> Dict[str, Tuple[float, float]]:
    """Two instances with mostly small changes and some large ones."""
    rng = np.random.default_rng(seed)
    v1 = rng.uniform(0.0, 1.0, n)
    v2 = np.clip(v1 + rng.normal(0.0, 0.2, n), 0.0, 1.0)
    return {f"item{i}": (float(a), float(b)) for i, (a, b) in enumerate(zip(v1, v2))}

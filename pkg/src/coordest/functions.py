"""Item functions f(v) and their lower-bound curves under threshold schemes.

A lower-bound curve is inf f over the vectors consistent with the sample of
``v`` at seed ``u``, as a function of ``u``.  Built-in kinds return it as a
list of analytic segments; custom kinds are tabulated from an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .sampling import Outcome, ThresholdScheme, sample_vector
from .segments import Constant, PowerLinear, TightArc

Piece = Tuple[float, float, object]  # (lo, hi, form) on (lo, hi]

CUSTOM_GRID_POINTS = 4096
CUSTOM_GRID_FLOOR = 1e-6


class FunctionError(ValueError):
    pass


def _crossings(scheme: ThresholdScheme, v: Sequence[float]) -> List[float]:
    pts = set(scheme.event_seeds())
    if scheme.kind != "full":
        for i, x in enumerate(v):
            c = scheme.crossing(i, x)
            if 0 < c < 1:
                pts.add(c)
    return sorted(pts)


def _pieces_from_cuts(cuts: Sequence[float]) -> List[Tuple[float, float]]:
    edges = [0] + [c for c in sorted(set(cuts)) if 0 < c < 1] + [1]
    return list(zip(edges, edges[1:]))


def _merge(pieces: List[Piece]) -> List[Piece]:
    """Fuse neighbouring equal constants so that curves stay short."""
    out: List[Piece] = []
    for lo, hi, form in pieces:
        if out and isinstance(form, Constant) and isinstance(out[-1][2], Constant) and out[-1][2].c == form.c:
            out[-1] = (out[-1][0], hi, form)
        else:
            out.append((lo, hi, form))
    return out


class FunctionSpec:
    """Base class.  Subclasses define ``value`` and ``pieces``."""

    name = "function"
    arity: Optional[int] = None

    def check_vector(self, v: Sequence[float]) -> None:
        if self.arity is not None and len(v) != self.arity:
            raise FunctionError(f"{self.name} takes {self.arity} entries, got {len(v)}")
        if any(x < 0 for x in v):
            raise FunctionError("entries must be nonnegative")

    def value(self, v: Sequence[float]) -> float:
        raise NotImplementedError

    def pieces(self, scheme: ThresholdScheme, v: Sequence[float]) -> List[Piece]:
        raise NotImplementedError

    def lower_bound(self, outcome: Outcome) -> float:
        """inf f over the consistent set of ``outcome``."""
        v0 = outcome.representative()
        for lo, hi, form in self.pieces(outcome.scheme, v0):
            if lo < outcome.rho <= hi:
                return float(form.value(outcome.rho))
        raise FunctionError("seed outside (0, 1]")

    def witness(self, outcome: Outcome) -> Tuple:
        """Consistent vector whose optimal estimate is largest (zeros for unsampled)."""
        return outcome.representative()

    def revealed(self, outcome: Outcome) -> bool:
        return outcome.is_full

    def reveal_probability(self, scheme: ThresholdScheme, v: Sequence[float]) -> float:
        if scheme.kind == "full":
            return 1.0
        return min(min(1.0, float(scheme.crossing(i, x))) for i, x in enumerate(v))

    def describe(self) -> str:
        return self.name


@dataclass(frozen=True)
class RgPPlus(FunctionSpec):
    """max(0, v1 - v2)^p on two entries."""

    p: float = 1.0
    arity = 2

    def __post_init__(self):
        if not self.p > 0:
            raise FunctionError("p must be positive")

    @property
    def name(self):
        return f"rgplus(p={self.p:g})"

    def value(self, v):
        return max(v[0] - v[1], 0.0) ** self.p

    def pieces(self, scheme, v):
        self.check_vector(v)
        v1, v2 = v
        if scheme.kind == "full":
            return [(0, 1, Constant(self.value(v)))]
        cuts = _crossings(scheme, v)
        if scheme.kind == "pps":
            cuts.append(v1 / scheme.tau[1])
        out = []
        for lo, hi in _pieces_from_cuts(cuts):
            mid = (lo + hi) / 2
            if v1 < scheme.threshold(0, mid):
                out.append((lo, hi, Constant(0.0)))
            elif v2 >= scheme.threshold(1, mid):
                out.append((lo, hi, Constant(self.value(v))))
            elif scheme.kind == "pps":
                t2 = scheme.tau[1]
                if mid * t2 >= v1:
                    out.append((lo, hi, Constant(0.0)))
                else:
                    out.append((lo, hi, PowerLinear(v1, t2, self.p)))
            else:
                cap = scheme.cap(1, scheme.threshold(1, mid))
                out.append((lo, hi, Constant(max(v1 - cap, 0) ** self.p)))
        return _merge(out)


@dataclass(frozen=True)
class RgP(FunctionSpec):
    """(max(v) - min(v))^p over all entries."""

    p: float = 1.0

    def __post_init__(self):
        if not self.p > 0:
            raise FunctionError("p must be positive")

    @property
    def name(self):
        return f"rg(p={self.p:g})"

    def value(self, v):
        return (max(v) - min(v)) ** self.p

    def _piece(self, scheme, v, lo, hi):
        mid = (lo + hi) / 2
        samp = [x for i, x in enumerate(v) if x >= scheme.threshold(i, mid)]
        uns = [i for i, x in enumerate(v) if x < scheme.threshold(i, mid)]
        if not samp:
            return [(lo, hi, Constant(0.0))]
        smax, smin = max(samp), min(samp)
        if not uns:
            return [(lo, hi, Constant((smax - smin) ** self.p))]
        if scheme.kind == "pps":
            tmin = min(scheme.tau[i] for i in uns)
            switch = smin / tmin
            if lo < switch < hi:
                return self._piece(scheme, v, lo, switch) + self._piece(scheme, v, switch, hi)
            if mid * tmin >= smin:
                return [(lo, hi, Constant((smax - smin) ** self.p))]
            return [(lo, hi, PowerLinear(smax, tmin, self.p))]
        low = min(scheme.cap(i, scheme.threshold(i, mid)) for i in uns)
        return [(lo, hi, Constant((smax - min(smin, low)) ** self.p))]

    def pieces(self, scheme, v):
        self.check_vector(v)
        if scheme.kind == "full":
            return [(0, 1, Constant(self.value(v)))]
        out = []
        for lo, hi in _pieces_from_cuts(_crossings(scheme, v)):
            out.extend(self._piece(scheme, v, lo, hi))
        return _merge(out)


@dataclass(frozen=True)
class TightFamily(FunctionSpec):
    """f(v) = (1 - v^(1-p)) / (1 - p) on [0, 1], single entry, 0 <= p < 1/2."""

    p: float = 0.25
    arity = 1

    def __post_init__(self):
        if not 0 <= self.p < 0.5:
            raise FunctionError("tightness family needs 0 <= p < 0.5")

    @property
    def name(self):
        return f"tight(p={self.p:g})"

    def check_vector(self, v):
        super().check_vector(v)
        if v[0] > 1:
            raise FunctionError("tightness family is defined on [0, 1]")

    def value(self, v):
        return (1.0 - v[0] ** (1.0 - self.p)) / (1.0 - self.p)

    def pieces(self, scheme, v):
        self.check_vector(v)
        if scheme.kind == "full":
            return [(0, 1, Constant(self.value(v)))]
        cuts = _crossings(scheme, v)
        if scheme.kind == "pps":
            cuts.append(1.0 / scheme.tau[0])
        out = []
        for lo, hi in _pieces_from_cuts(cuts):
            mid = (lo + hi) / 2
            if v[0] >= scheme.threshold(0, mid):
                out.append((lo, hi, Constant(self.value(v))))
            elif scheme.kind == "pps":
                t = scheme.tau[0]
                out.append((lo, hi, Constant(0.0) if mid * t >= 1 else TightArc(self.p, t)))
            else:
                cap = min(scheme.cap(0, scheme.threshold(0, mid)), 1)
                out.append((lo, hi, Constant(self.value((cap,)))))
        return _merge(out)


@dataclass(frozen=True)
class CustomLowerBound(FunctionSpec):
    """User-supplied function.

    ``lower_bound_fn(outcome)`` returns inf f over the consistent set.
    ``witness_fn(outcome)`` (optional) returns the consistent vector
    maximizing the optimal estimate; without it U* and the upper end of
    the optimal range are unavailable.  ``reveal_fn(scheme, v)`` overrides
    the reveal probability used by Horvitz-Thompson.
    """

    value_fn: Callable[[Sequence[float]], float] = None
    lower_bound_fn: Callable[[Outcome], float] = None
    witness_fn: Optional[Callable[[Outcome], Tuple]] = None
    reveal_fn: Optional[Callable[[ThresholdScheme, Sequence[float]], float]] = None
    label: str = "custom"
    grid_points: int = CUSTOM_GRID_POINTS

    def __post_init__(self):
        if self.value_fn is None or self.lower_bound_fn is None:
            raise FunctionError("custom function needs value_fn and lower_bound_fn")

    @property
    def name(self):
        return self.label

    def value(self, v):
        return float(self.value_fn(v))

    def lower_bound(self, outcome):
        return float(self.lower_bound_fn(outcome))

    def witness(self, outcome):
        if self.witness_fn is None:
            raise FunctionError(f"{self.label}: no witness oracle, upper range end unavailable")
        return tuple(self.witness_fn(outcome))

    def reveal_probability(self, scheme, v):
        if self.reveal_fn is not None:
            return float(self.reveal_fn(scheme, v))
        return super().reveal_probability(scheme, v)

    def grid(self, scheme, v) -> np.ndarray:
        g = np.geomspace(CUSTOM_GRID_FLOOR, 1.0, self.grid_points)
        extra = [c for c in _crossings(scheme, v) if CUSTOM_GRID_FLOOR < c < 1]
        return np.unique(np.concatenate([g, np.asarray(extra, dtype=float)]))

    def pieces(self, scheme, v):
        # linear interpolation per cell, using the right limit at the left end so jumps stay put
        g = self.grid(scheme, v)
        right = [self.lower_bound(sample_vector(v, float(u), scheme)) for u in g]
        out = [(0.0, float(g[0]), Constant(float(right[0])))]
        for a, b, gr in zip(g, g[1:], right[1:]):
            a, b = float(a), float(b)
            gl = self.lower_bound(sample_vector(v, math.nextafter(a, b), scheme))
            if gl <= gr:
                out.append((a, b, Constant(float(gr))))
            else:
                beta = (gl - gr) / (b - a)
                out.append((a, b, PowerLinear(gr + beta * b, beta, 1.0)))
        return _merge(out)


def make_function(kind: str, p: float = 1.0) -> FunctionSpec:
    kind = kind.lower()
    if kind in ("rgplus", "rgpplus", "lpplus"):
        return RgPPlus(p)
    if kind in ("rg", "rgp", "lp", "lpp"):
        return RgP(p)
    if kind == "tight":
        return TightFamily(p)
    raise FunctionError(f"unknown function kind {kind!r}")

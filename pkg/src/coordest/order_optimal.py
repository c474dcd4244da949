"""Order-optimal estimators on a finite domain under step thresholds.

Outcomes are processed from the least informative seed interval to the
most informative one.  On each outcome the value is the optimal extension
for the first consistent vector in the priority order, given what the
coarser outcomes already contribute.  Arithmetic is exact when the
breakpoints and function values are rational.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .functions import FunctionSpec
from .sampling import Outcome, ThresholdScheme

Key = Tuple[Optional[object], ...]


class OrderError(ValueError):
    pass


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(float(x))


def _fmt(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


class Priority:
    """A priority order given by chains ``a < b < c`` (transitively closed)
    or by f value ("lstar": smaller f first, "ustar": larger f first)."""

    def __init__(self, spec: Union[str, Sequence[Sequence[Tuple]]]):
        self.spec = spec
        self.before: Dict[Tuple, set] = {}
        if isinstance(spec, str):
            if spec not in ("lstar", "ustar"):
                raise OrderError(f"unknown named order {spec!r}")
            return
        for chain in spec:
            chain = [tuple(x) for x in chain]
            for i, a in enumerate(chain):
                for b in chain[i + 1:]:
                    self.before.setdefault(b, set()).add(a)
        # transitive closure
        changed = True
        while changed:
            changed = False
            for b, preds in self.before.items():
                extra = set().union(*(self.before.get(a, set()) for a in preds)) - preds
                if extra:
                    preds |= extra
                    changed = True
        for b, preds in self.before.items():
            if b in preds:
                raise OrderError(f"order has a cycle through {b}")

    def minimal(self, group: Sequence[Tuple], fvals: Dict[Tuple, Fraction]) -> List[Tuple]:
        if self.spec == "lstar":
            m = min(fvals[z] for z in group)
            return [z for z in group if fvals[z] == m]
        if self.spec == "ustar":
            m = max(fvals[z] for z in group)
            return [z for z in group if fvals[z] == m]
        gs = set(group)
        return [z for z in group if not (self.before.get(z, set()) & gs)]

    def to_json(self):
        if isinstance(self.spec, str):
            return self.spec
        return [[[_fmt(x) for x in z] for z in chain] for chain in self.spec]


@dataclass(frozen=True)
class EstimatorTable:
    function: str
    scheme: ThresholdScheme
    edges: Tuple[Fraction, ...]  # 0 = e0 < e1 < ... < em = 1
    domain: Tuple[Tuple, ...]
    order: object
    cells: Dict[Tuple[int, Key], Fraction] = field(default_factory=dict)

    def interval(self, j: int) -> Tuple[Fraction, Fraction]:
        return self.edges[j - 1], self.edges[j]

    def value(self, j: int, key: Key) -> Fraction:
        try:
            return self.cells[(j, key)]
        except KeyError:
            raise OrderError(f"unknown outcome {key} on interval {j}") from None

    def estimates_for(self, v: Sequence) -> List[Tuple[Fraction, Fraction, Fraction]]:
        """(lo, hi, value) over all intervals for the data vector v."""
        v = tuple(v)
        return [(*self.interval(j), self.value(j, _key(self.scheme, v, self.edges[j])))
                for j in range(1, len(self.edges))]

    def expectation(self, v: Sequence) -> Fraction:
        return sum(((hi - lo) * val for lo, hi, val in self.estimates_for(v)), Fraction(0))

    def label(self, j: int, key: Key) -> str:
        parts = []
        for i, x in enumerate(key):
            if x is None:
                cap = self.scheme.cap(i, self.scheme.threshold(i, self.edges[j]))
                parts.append(f"<={_fmt(cap)}")
            else:
                parts.append(_fmt(x))
        return "(" + ",".join(parts) + ")"

    def to_json(self) -> dict:
        cells = []
        for (j, key), val in sorted(self.cells.items(), key=lambda kv: (kv[0][0], _sort_key(kv[0][1]))):
            lo, hi = self.interval(j)
            cells.append({
                "interval": [_fmt(lo), _fmt(hi)],
                "outcome": [None if x is None else _fmt(x) for x in key],
                "label": self.label(j, key),
                "value": _fmt(val),
            })
        return {
            "function": self.function,
            "scheme": self.scheme.to_json(),
            "domain": [[_fmt(x) for x in z] for z in self.domain],
            "order": self.order,
            "cells": cells,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EstimatorTable":
        scheme = ThresholdScheme.from_json(obj["scheme"])
        edges = _edges(scheme)
        cells = {}
        for c in obj["cells"]:
            hi = Fraction(c["interval"][1])
            j = edges.index(hi)
            key = tuple(None if x is None else Fraction(x) for x in c["outcome"])
            cells[(j, key)] = Fraction(c["value"])
        domain = tuple(tuple(Fraction(x) for x in z) for z in obj["domain"])
        return cls(obj["function"], scheme, tuple(edges), domain, obj["order"], cells)

    def listing(self) -> str:
        """Text table: one row per outcome label, one column per seed interval."""
        m = len(self.edges) - 1
        rows: Dict[str, Dict[int, Fraction]] = {}
        order: Dict[str, tuple] = {}
        for (j, key), val in self.cells.items():
            lab = self.label(j, key)
            rows.setdefault(lab, {})[j] = val
            order[lab] = min(order.get(lab, (_sort_key(key), j)), (_sort_key(key), j))
        head = ["outcome".ljust(14)] + [f"({_fmt(self.edges[j - 1])},{_fmt(self.edges[j])}]".rjust(12)
                                         for j in range(1, m + 1)]
        lines = [" ".join(head)]
        for lab in sorted(rows, key=order.get):
            cols = [lab.ljust(14)] + [(_fmt(rows[lab][j]) if j in rows[lab] else "").rjust(12)
                                      for j in range(1, m + 1)]
            lines.append(" ".join(cols))
        return "\n".join(lines)


def _sort_key(key: Key):
    return tuple((-1 if x is None else x) for x in key)


def _edges(scheme: ThresholdScheme) -> List[Fraction]:
    ev = [_exact(e) for e in scheme.event_seeds()]
    edges = [Fraction(0)] + ev
    if edges[-1] < 1:
        edges.append(Fraction(1))
    return edges


def _key(scheme: ThresholdScheme, v: Tuple, u) -> Key:
    return tuple(x if x >= scheme.threshold(i, u) else None for i, x in enumerate(v))


def order_optimal_build(fspec: FunctionSpec, domain: Iterable[Sequence], scheme: ThresholdScheme,
                        order: Union[str, Sequence]) -> EstimatorTable:
    if scheme.kind != "step":
        raise OrderError("order-optimal tables need a step scheme")
    prio = order if isinstance(order, Priority) else Priority(order)
    dom = tuple(dict.fromkeys(tuple(_exact(x) for x in v) for v in domain))
    if not dom:
        raise OrderError("empty domain")
    for v in dom:
        if len(v) != scheme.r:
            raise OrderError(f"vector {v} does not match scheme arity {scheme.r}")
        for i, x in enumerate(v):
            if x != 0 and x not in scheme.levels[i]:
                raise OrderError(f"value {x} of {v} is not a level of entry {i + 1}")
    edges = _edges(scheme)
    m = len(edges) - 1
    fv = {v: _exact(fspec.value(v)) for v in dom}

    keys = {v: [None] + [_key(scheme, v, edges[j]) for j in range(1, m + 1)] for v in dom}
    groups: List[Dict[Key, List[Tuple]]] = [dict() for _ in range(m + 1)]
    for v in dom:
        for j in range(1, m + 1):
            groups[j].setdefault(keys[v][j], []).append(v)
    # lower bound of each vector on each interval
    lb = {v: [None] + [min(fv[z] for z in groups[j][keys[v][j]]) for j in range(1, m + 1)] for v in dom}

    cells: Dict[Tuple[int, Key], Fraction] = {}

    def coarse_mass(z, j):
        return sum(((edges[k] - edges[k - 1]) * cells[(k, keys[z][k])] for k in range(j + 1, m + 1)),
                   Fraction(0))

    def extension(z, j):
        M = coarse_mass(z, j)
        return min((lb[z][i] - M) / (edges[j] - edges[i - 1]) for i in range(1, j + 1))

    for j in range(m, 0, -1):
        for key, group in groups[j].items():
            if any(fv[z] == 0 for z in group):
                cells[(j, key)] = Fraction(0)
                continue
            mins = prio.minimal(group, fv)
            if not mins:
                raise OrderError(f"order has no first element among {group}")
            vals = {extension(z, j) for z in mins}
            if len(vals) > 1:
                raise OrderError(f"order does not decide between {sorted(mins)} on outcome {key}")
            val = vals.pop()
            if val < 0:
                raise OrderError(f"negative estimate on outcome {key}: f not estimable on this domain")
            cells[(j, key)] = val
    return EstimatorTable(fspec.describe(), scheme, tuple(edges), dom, prio.to_json(), cells)


def order_optimal_estimate(table: EstimatorTable, outcome: Outcome) -> Fraction:
    rho = _exact(outcome.rho)
    for j in range(1, len(table.edges)):
        if table.edges[j - 1] < rho <= table.edges[j]:
            key = tuple(_exact(outcome.sampled[i]) if i in outcome.sampled else None for i in range(outcome.r))
            return table.value(j, key)
    raise OrderError("seed outside (0, 1]")


def check_unbiased(table: EstimatorTable, fspec: FunctionSpec) -> List[Tuple]:
    """Vectors whose exact expectation differs from f."""
    return [v for v in table.domain if table.expectation(v) != _exact(fspec.value(v))]


def dump_table(table: EstimatorTable) -> str:
    return json.dumps(table.to_json(), indent=2)

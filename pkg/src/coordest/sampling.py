"""Coordinated (shared-seed) monotone sampling of data vectors.

Every item gets one seed ``u`` in (0, 1], derived from its key by hashing,
and entry ``i`` of the item's vector is included iff ``v[i] >= tau_i(u)``.
Because each ``tau_i`` is non-decreasing, a smaller seed always reveals a
superset of entries.

Entry indices are 0-based in the API and 1-based in the on-disk formats.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

__all__ = [
    "SamplingError",
    "ThresholdScheme",
    "Outcome",
    "SampleRecord",
    "SampleSet",
    "EntryBound",
    "seed_from_key",
    "threshold",
    "sample_vector",
    "sample_matrix",
    "consistent_bounds",
    "read_matrix_csv",
    "write_samples",
    "read_samples",
]

_TWO64 = 2**64


class SamplingError(ValueError):
    """Invalid scheme, data vector, or matrix."""


def _as_bytes(x) -> bytes:
    if isinstance(x, bytes):
        return x
    return str(x).encode("utf-8")


def seed_from_key(key, salt=b"") -> float:
    """Map an item key to a seed in (0, 1] with a salted 64-bit hash.

    The hash input is length-prefixed so that ``("ab", "c")`` and
    ``("a", "bc")`` do not collide.  ``h`` in ``[0, 2**64)`` maps to
    ``(h + 1) / 2**64``, so zero is unreachable.
    """
    key, salt = _as_bytes(key), _as_bytes(salt)
    h = hashlib.blake2b(len(key).to_bytes(8, "little") + key + salt, digest_size=8)
    return (int.from_bytes(h.digest(), "little") + 1) / _TWO64


@dataclass(frozen=True)
class ThresholdScheme:
    """Per-entry threshold functions.

    ``pps``: ``tau_i(u) = u * tau[i]`` with ``tau[i] > 0``.

    ``step``: entry ``i`` uses strictly increasing ``breakpoints[i]`` and
    matching positive ``levels[i]``; a value ``x`` is sampled iff
    ``u <= breakpoints[i][j]`` for the largest ``j`` with
    ``levels[i][j] <= x``.  Data under a step scheme live on the discrete
    grid ``{0} | levels[i]``.

    ``full``: ``tau_i == 0``, every entry is always sampled.
    """

    kind: str
    tau: Tuple[float, ...] = ()
    breakpoints: Tuple[Tuple, ...] = ()
    levels: Tuple[Tuple, ...] = ()
    arity: int = 0

    def __post_init__(self):
        if self.kind == "pps":
            if not self.tau:
                raise SamplingError("pps scheme needs at least one rate")
            for t in self.tau:
                if not (t > 0 and math.isfinite(t)):
                    raise SamplingError(f"pps rate must be positive and finite, got {t!r}")
            object.__setattr__(self, "arity", len(self.tau))
        elif self.kind == "step":
            if not self.breakpoints or len(self.breakpoints) != len(self.levels):
                raise SamplingError("step scheme needs breakpoints and levels per entry")
            for bps, lvls in zip(self.breakpoints, self.levels):
                if len(bps) == 0 or len(bps) != len(lvls):
                    raise SamplingError("breakpoints and levels must have equal nonzero length")
                if any(b <= a for a, b in zip(bps, bps[1:])) or bps[0] <= 0 or bps[-1] > 1:
                    raise SamplingError("breakpoints must be strictly increasing in (0, 1]")
                if any(b <= a for a, b in zip(lvls, lvls[1:])) or lvls[0] <= 0:
                    raise SamplingError("levels must be positive and strictly increasing")
            object.__setattr__(self, "arity", len(self.breakpoints))
        elif self.kind == "full":
            if self.arity < 1:
                raise SamplingError("full scheme needs arity >= 1")
        else:
            raise SamplingError(f"unknown scheme kind {self.kind!r}")

    # constructors

    @classmethod
    def pps(cls, tau: Sequence[float]) -> "ThresholdScheme":
        return cls("pps", tau=tuple(float(t) for t in tau))

    @classmethod
    def step(cls, breakpoints: Sequence, levels: Optional[Sequence] = None, r: int = 1) -> "ThresholdScheme":
        """Same step thresholds on all ``r`` entries (levels default to 1..n)."""
        bps = tuple(breakpoints)
        lvls = tuple(levels) if levels is not None else tuple(range(1, len(bps) + 1))
        return cls("step", breakpoints=(bps,) * r, levels=(lvls,) * r)

    @classmethod
    def full(cls, r: int) -> "ThresholdScheme":
        return cls("full", arity=r)

    @property
    def r(self) -> int:
        return self.arity

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.arity:
            raise IndexError(f"entry index {i} out of range for arity {self.arity}")

    def threshold(self, i: int, u):
        """``tau_i(u)``: entry value ``x`` is sampled at seed ``u`` iff ``x >= tau_i(u)``."""
        self._check_index(i)
        if self.kind == "pps":
            return u * self.tau[i]
        if self.kind == "full":
            return 0.0
        bps, lvls = self.breakpoints[i], self.levels[i]
        j = bisect.bisect_left(bps, u)
        return lvls[j] if j < len(bps) else math.inf

    def crossing(self, i: int, x):
        """Largest seed at which value ``x`` of entry ``i`` is still sampled (0 if never)."""
        self._check_index(i)
        if self.kind == "pps":
            return x / self.tau[i]
        if self.kind == "full":
            return math.inf
        lvls = self.levels[i]
        j = bisect.bisect_right(lvls, x)
        return self.breakpoints[i][j - 1] if j > 0 else 0

    def cap(self, i: int, bound):
        """Supremum of admissible values strictly below ``bound``.

        Continuous for pps (the bound itself, approached from below);
        the next lower grid value for step schemes.
        """
        if self.kind == "step":
            lvls = self.levels[i]
            j = bisect.bisect_left(lvls, bound)
            return lvls[j - 1] if j > 0 else 0
        return bound

    def event_seeds(self) -> List:
        """Seeds where some threshold jumps (only step schemes have any)."""
        if self.kind != "step":
            return []
        return sorted({b for bps in self.breakpoints for b in bps})

    def project(self, indices: Sequence[int]) -> "ThresholdScheme":
        for i in indices:
            self._check_index(i)
        if self.kind == "pps":
            return ThresholdScheme.pps([self.tau[i] for i in indices])
        if self.kind == "full":
            return ThresholdScheme.full(len(indices))
        return ThresholdScheme(
            "step",
            breakpoints=tuple(self.breakpoints[i] for i in indices),
            levels=tuple(self.levels[i] for i in indices),
        )

    def to_json(self) -> dict:
        if self.kind == "pps":
            return {"kind": "pps", "tau": list(self.tau)}
        if self.kind == "full":
            return {"kind": "full", "r": self.arity}
        return {
            "kind": "step",
            "breakpoints": [[_num_out(b) for b in bps] for bps in self.breakpoints],
            "levels": [[_num_out(x) for x in lv] for lv in self.levels],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ThresholdScheme":
        kind = obj.get("kind")
        if kind == "pps":
            return cls.pps(obj["tau"])
        if kind == "full":
            return cls.full(int(obj["r"]))
        if kind == "step":
            return cls(
                "step",
                breakpoints=tuple(tuple(_num_in(b) for b in bps) for bps in obj["breakpoints"]),
                levels=tuple(tuple(_num_in(x) for x in lv) for lv in obj["levels"]),
            )
        raise SamplingError(f"unknown scheme kind {kind!r}")


def _num_out(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return x


def _num_in(x):
    if isinstance(x, str):
        return Fraction(x)
    return x


def threshold(scheme: ThresholdScheme, i: int, u):
    return scheme.threshold(i, u)


@dataclass(frozen=True)
class EntryBound:
    """One factor of the consistent set: the point ``{value}`` or ``[0, value)``."""

    value: float
    exact: bool

    def contains(self, x) -> bool:
        return x == self.value if self.exact else 0 <= x < self.value


@dataclass(frozen=True)
class Outcome:
    """Sample of one vector at seed ``rho``.

    ``sampled`` maps entry index to exact value; ``bounds`` maps each
    unsampled index to ``tau_i(rho)``, a strict upper bound on its value.
    """

    rho: float
    sampled: Mapping[int, float]
    bounds: Mapping[int, float]
    scheme: ThresholdScheme

    @property
    def r(self) -> int:
        return self.scheme.r

    @property
    def is_full(self) -> bool:
        return not self.bounds

    def consistent_with(self, v: Sequence[float]) -> bool:
        return all(b.contains(x) for b, x in zip(consistent_bounds(self), v))

    def representative(self) -> Tuple:
        """A consistent vector: sampled values, zeros elsewhere.

        Zero is never sampled under pps or step thresholds, so this vector
        yields exactly this outcome's coarsenings for every seed >= rho.
        """
        return tuple(self.sampled.get(i, 0) for i in range(self.r))

    def coarsen(self, u) -> "Outcome":
        """The outcome the same data would give at a larger seed ``u >= rho``."""
        if u < self.rho:
            raise ValueError("can only coarsen to a seed >= rho")
        return sample_vector(self.representative(), u, self.scheme)

    def project(self, indices: Sequence[int]) -> "Outcome":
        pos = {old: new for new, old in enumerate(indices)}
        return Outcome(
            self.rho,
            {pos[i]: x for i, x in self.sampled.items() if i in pos},
            {pos[i]: b for i, b in self.bounds.items() if i in pos},
            self.scheme.project(indices),
        )


def _check_vector(v: Sequence, scheme: ThresholdScheme) -> None:
    if len(v) != scheme.r:
        raise SamplingError(f"vector arity {len(v)} does not match scheme arity {scheme.r}")
    for x in v:
        if not (x >= 0) or (isinstance(x, float) and math.isnan(x)):
            raise SamplingError(f"entries must be nonnegative, got {x!r}")


def sample_vector(v: Sequence, u, scheme: ThresholdScheme) -> Outcome:
    _check_vector(v, scheme)
    if not (0 < u <= 1):
        raise SamplingError(f"seed must lie in (0, 1], got {u!r}")
    sampled, bounds = {}, {}
    for i, x in enumerate(v):
        t = scheme.threshold(i, u)
        if x >= t:
            sampled[i] = x
        else:
            bounds[i] = t
    return Outcome(u, sampled, bounds, scheme)


def consistent_bounds(outcome: Outcome) -> List[EntryBound]:
    """Encode S* as a product of points and half-open intervals ``[0, tau_i(rho))``."""
    out = []
    for i in range(outcome.r):
        if i in outcome.sampled:
            out.append(EntryBound(outcome.sampled[i], True))
        else:
            out.append(EntryBound(outcome.bounds[i], False))
    return out


@dataclass(frozen=True)
class SampleRecord:
    key: str
    seed: float
    outcome: Outcome


@dataclass
class SampleSet:
    r: int
    scheme: ThresholdScheme
    salt: str
    records: List[SampleRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_key(self) -> Dict[str, SampleRecord]:
        return {rec.key: rec for rec in self.records}


def sample_matrix(
    matrix: Mapping[str, Sequence[float]],
    scheme: ThresholdScheme,
    salt="",
    seeds: Optional[Mapping[str, float]] = None,
) -> SampleSet:
    """Sample every item with one shared seed across its instances.

    ``matrix`` maps item key to its data vector (one value per instance).
    ``seeds`` overrides hashing per key; it exists for fixtures.
    """
    salt_s = salt.decode() if isinstance(salt, bytes) else str(salt)
    out = SampleSet(scheme.r, scheme, salt_s)
    for key, v in matrix.items():
        v = tuple(v)
        _check_vector(v, scheme)
        u = seeds[key] if seeds is not None and key in seeds else seed_from_key(key, salt)
        out.records.append(SampleRecord(str(key), u, sample_vector(v, u, scheme)))
    return out


# file formats


def read_matrix_csv(source) -> Dict[str, Tuple[float, ...]]:
    """Read ``key,v1,...,vr`` rows.  Empty cells are 0."""
    if isinstance(source, str):
        with open(source, newline="") as fh:
            return read_matrix_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        return {}
    if len(header) < 2 or header[0].strip() != "key":
        raise SamplingError("CSV header must be key,v1,...,vr")
    r = len(header) - 1
    out: Dict[str, Tuple[float, ...]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != r + 1:
            raise SamplingError(f"line {lineno}: expected {r + 1} fields, got {len(row)}")
        key = row[0]
        if key in out:
            raise SamplingError(f"line {lineno}: duplicate key {key!r}")
        try:
            vals = tuple(float(c) if c.strip() else 0.0 for c in row[1:])
        except ValueError as exc:
            raise SamplingError(f"line {lineno}: {exc}") from None
        if any(not (x >= 0) or math.isinf(x) for x in vals):
            raise SamplingError(f"line {lineno}: values must be finite and nonnegative")
        out[key] = vals
    return out


def write_samples(samples: SampleSet, fh: io.TextIOBase) -> None:
    """JSON lines: a metadata header, then one object per item."""
    header = {"r": samples.r, "scheme": samples.scheme.to_json(), "salt": samples.salt}
    fh.write(json.dumps(header, sort_keys=True) + "\n")
    for rec in samples.records:
        o = rec.outcome
        fh.write(
            json.dumps(
                {
                    "key": rec.key,
                    "seed": rec.seed,
                    "sampled": {str(i + 1): _num_out(x) for i, x in sorted(o.sampled.items())},
                    "bounds": {str(i + 1): _num_out(b) for i, b in sorted(o.bounds.items())},
                },
                sort_keys=True,
            )
            + "\n"
        )


def read_samples(fh: Iterable[str]) -> SampleSet:
    lines = (ln for ln in fh if ln.strip())
    try:
        header = json.loads(next(lines))
    except StopIteration:
        raise SamplingError("empty sample file") from None
    scheme = ThresholdScheme.from_json(header["scheme"])
    out = SampleSet(int(header["r"]), scheme, header.get("salt", ""))
    for ln in lines:
        obj = json.loads(ln)
        sampled = {int(k) - 1: _num_in(x) for k, x in obj["sampled"].items()}
        bounds = {int(k) - 1: _num_in(b) for k, b in obj["bounds"].items()}
        u = obj["seed"]
        out.records.append(SampleRecord(obj["key"], u, Outcome(u, sampled, bounds, scheme)))
    return out

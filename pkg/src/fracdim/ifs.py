"""1D similarity iterated function systems, their attractor hulls, cylinder
endpoints, and the finite partitions fed to the entropy machinery.

Maps are x -> ratio*x + offset with 0 < ratio < 1.  Each map carries its
binary64 parameters (used by the certified floating-point engine) and, when
known, exact parameters (Fraction, or FieldElement of an algebraic field) used
by the exact rational solver.  A partition is just the sorted breakpoint set of
cylinder endpoints at a given level; the dimension bound downstream is valid
for *any* partition, so the construction here only has to be internally
consistent, not canonical.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .algebraic import FieldElement
from .core_math import WeightVector, float_down, float_up
from .errors import DomainError, PreconditionError, ResourceLimitError

#: default cap on the number of cylinder endpoints enumerated for a partition
DEFAULT_ENDPOINT_CAP = 2 ** 24

_CELL_CAP_ENV = "FRACDIM_CELL_CAP"


def endpoint_cap() -> int:
    raw = os.environ.get(_CELL_CAP_ENV)
    if raw:
        try:
            return int(raw)
        except ValueError:
            pass
    return DEFAULT_ENDPOINT_CAP


# ---------------------------------------------------------------------------
# intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; the empty interval is Interval.empty()."""

    lo: float
    hi: float

    @staticmethod
    def empty() -> "Interval":
        return _EMPTY

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    @property
    def width(self) -> float:
        return 0.0 if self.is_empty else self.hi - self.lo

    def contains(self, x: float) -> bool:
        return (not self.is_empty) and self.lo <= x <= self.hi

    def contains_interval(self, other: "Interval") -> bool:
        if other.is_empty:
            return True
        return (not self.is_empty) and self.lo <= other.lo and other.hi <= self.hi

    def intersect(self, other: "Interval") -> "Interval":
        if self.is_empty or other.is_empty:
            return _EMPTY
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else _EMPTY

    def __repr__(self):
        return "Interval.empty()" if self.is_empty else f"Interval({self.lo!r}, {self.hi!r})"


_EMPTY = Interval(math.inf, -math.inf)


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned box as a pair of closed intervals; empty if either is."""

    x: Interval
    y: Interval

    @property
    def is_empty(self) -> bool:
        return self.x.is_empty or self.y.is_empty

    def intersect(self, other: "Box2D") -> "Box2D":
        return Box2D(self.x.intersect(other.x), self.y.intersect(other.y))

    def contains_box(self, other: "Box2D") -> bool:
        if other.is_empty:
            return True
        return self.x.contains_interval(other.x) \
            and self.y.contains_interval(other.y)


# ---------------------------------------------------------------------------
# similarity maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Similarity1D:
    """x -> ratio*x + offset with ratio in (0, 1).

    ratio_exact/offset_exact, when not None, are Fractions or FieldElements
    equal to the binary64 parameters' intended values (the floats are then the
    correctly rounded versions of the exact ones).
    """

    ratio: float
    offset: float
    ratio_exact: object = None
    offset_exact: object = None

    def __post_init__(self):
        if not (0.0 < self.ratio < 1.0):
            raise DomainError(f"contraction ratio must be in (0,1), got {self.ratio}")

    def __call__(self, x: float) -> float:
        return self.ratio * x + self.offset

    @property
    def has_exact(self) -> bool:
        return self.ratio_exact is not None and self.offset_exact is not None

    def fixed_point(self) -> float:
        return self.offset / (1.0 - self.ratio)

    def fixed_point_exact(self):
        return self.offset_exact / (1 - self.ratio_exact)

    def apply_exact(self, x):
        return self.ratio_exact * x + self.offset_exact

    def invert_exact(self, y):
        return (y - self.offset_exact) / self.ratio_exact


def preimage(m: Similarity1D, iv: Interval) -> Interval:
    """Exact affine preimage [ (lo-offset)/ratio, (hi-offset)/ratio ] in
    binary64 (each endpoint correctly rounded per operation)."""
    if iv.is_empty:
        raise PreconditionError("preimage of the empty interval")
    return Interval((iv.lo - m.offset) / m.ratio, (iv.hi - m.offset) / m.ratio)


# ---------------------------------------------------------------------------
# the IFS itself
# ---------------------------------------------------------------------------

class IFS1D:
    """A finite list of contracting similarities with a probability vector."""

    def __init__(self, maps: Sequence[Similarity1D], weights: WeightVector):
        maps = tuple(maps)
        if len(maps) < 2:
            raise DomainError("an IFS needs at least two maps")
        if len(maps) != len(weights):
            raise DomainError(
                f"{len(maps)} maps but {len(weights)} weights")
        self.maps = maps
        self.weights = weights

    @property
    def ell(self) -> int:
        return len(self.maps)

    @property
    def has_exact(self) -> bool:
        return all(m.has_exact for m in self.maps)

    def __repr__(self):
        return f"IFS1D({len(self.maps)} maps, weights={self.weights!r})"


def attractor_hull(ifs: IFS1D) -> Interval:
    """Smallest interval [c, d] with S_i([c, d]) included in [c, d] for
    every map: c and d are the extreme fixed points offset/(1-ratio)."""
    if ifs.has_exact:
        fps = [m.fixed_point_exact() for m in ifs.maps]
        lo, hi = min(fps), max(fps)
        return Interval(float_down(_as_fraction_lo(lo)), float_up(_as_fraction_hi(hi)))
    fps = [m.fixed_point() for m in ifs.maps]
    return Interval(min(fps), max(fps))


def attractor_hull_exact(ifs: IFS1D):
    """(lo, hi) as exact values; requires exact map parameters."""
    if not ifs.has_exact:
        raise PreconditionError("exact hull needs exact map parameters")
    fps = [m.fixed_point_exact() for m in ifs.maps]
    return min(fps), max(fps)


def _as_fraction_lo(x):
    if isinstance(x, FieldElement):
        return Fraction(x.field.float_bounds(x)[0])
    return Fraction(x)


def _as_fraction_hi(x):
    if isinstance(x, FieldElement):
        return Fraction(x.field.float_bounds(x)[1])
    return Fraction(x)


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Strictly increasing breakpoints a_0 < ... < a_M spanning the hull.

    breakpoints_exact, when present, is the exact-arithmetic version (same
    mathematical set, deduplicated exactly rather than in binary64; the two
    tuples may legitimately differ in length if distinct exact endpoints
    collide as floats).
    """

    breakpoints: Tuple[float, ...]
    breakpoints_exact: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        bp = self.breakpoints
        if len(bp) < 2:
            raise DomainError("a partition needs at least two breakpoints")
        for a, b in zip(bp, bp[1:]):
            if not a < b:
                raise DomainError("breakpoints must be strictly increasing")

    @property
    def n_cells(self) -> int:
        return len(self.breakpoints) - 1

    def cells(self):
        bp = self.breakpoints
        return [Interval(a, b) for a, b in zip(bp, bp[1:])]

    def cells_exact(self):
        if self.breakpoints_exact is None:
            raise PreconditionError("partition carries no exact breakpoints")
        bp = self.breakpoints_exact
        return list(zip(bp, bp[1:]))

    @property
    def span(self) -> Interval:
        return Interval(self.breakpoints[0], self.breakpoints[-1])


def generate_partition(ifs: IFS1D, N: int, cap: Optional[int] = None) -> Partition:
    """Breakpoints {S_I(c), S_I(d) : |I| = N} for the hull [c, d].

    The endpoint set is built iteratively, E_{k+1} = union of S_i(E_k) over
    the maps, starting from the hull endpoints; after N rounds the floats are
    sorted and deduplicated by exact binary64 equality (no tolerance: nearby
    but distinct endpoints stay distinct cells, which is correctness-neutral
    for the downstream bound).  Duplicate floats -- zero-width cells -- are
    dropped; they carry no mass for an atomless measure.  When the IFS has
    exact parameters an exactly deduplicated endpoint tuple is attached too.
    """
    if N < 1:
        raise DomainError("partition level must be >= 1")
    cap = endpoint_cap() if cap is None else cap
    if len(ifs.maps) ** N * 2 > cap:
        raise ResourceLimitError(
            f"level {N} would enumerate {2 * len(ifs.maps) ** N} endpoints "
            f"(cap {cap}); raise {_CELL_CAP_ENV} to override")

    hull = attractor_hull(ifs)
    pts = [hull.lo, hull.hi]
    for _ in range(N):
        nxt = []
        for m in ifs.maps:
            r, o = m.ratio, m.offset
            nxt.extend(r * p + o for p in pts)
        pts = nxt
        if len(pts) > cap:
            raise ResourceLimitError(f"endpoint enumeration exceeded cap {cap}")
        # cheap dedup each round keeps the list from ballooning needlessly
        pts = sorted(set(pts))

    exact_pts = None
    if ifs.has_exact:
        lo_e, hi_e = attractor_hull_exact(ifs)
        cur = [lo_e, hi_e]
        for _ in range(N):
            nxt = []
            for m in ifs.maps:
                nxt.extend(m.apply_exact(p) for p in cur)
            cur = _dedup_exact(nxt)
            if len(cur) > cap:
                raise ResourceLimitError(
                    f"exact endpoint enumeration exceeded cap {cap}")
        exact_pts = tuple(_sort_exact(cur))

    return Partition(tuple(pts), exact_pts)


def _dedup_exact(values):
    if values and isinstance(values[0], FieldElement):
        seen = {}
        for v in values:
            seen.setdefault(v.coeffs, v)
        return list(seen.values())
    return list(set(values))


def _sort_exact(values):
    if values and isinstance(values[0], FieldElement):
        # exact comparisons; keys via certified float brackets would be
        # cheaper but sorting a few thousand elements exactly is fine
        import functools
        return sorted(values, key=functools.cmp_to_key(
            lambda a, b: a.field.sign(a - b)))
    return sorted(values)


# ---------------------------------------------------------------------------
# stock systems and file I/O
# ---------------------------------------------------------------------------

def three_map_overlap_ifs() -> IFS1D:
    """{x/2, (x+1)/3, (x+3)/4} with equal weights: an overlapping system
    whose hull is [0, 1] and whose cylinder measures are all rational."""
    maps = (
        Similarity1D(0.5, 0.0, Fraction(1, 2), Fraction(0)),
        Similarity1D(1.0 / 3.0, 1.0 / 3.0, Fraction(1, 3), Fraction(1, 3)),
        Similarity1D(0.25, 0.75, Fraction(1, 4), Fraction(3, 4)),
    )
    return IFS1D(maps, WeightVector.equal(3))


def no_overlap_ifs() -> IFS1D:
    """{x/2, x/2 + 1/2} with equal weights: the dyadic full-branch system."""
    maps = (
        Similarity1D(0.5, 0.0, Fraction(1, 2), Fraction(0)),
        Similarity1D(0.5, 0.5, Fraction(1, 2), Fraction(1, 2)),
    )
    return IFS1D(maps, WeightVector.equal(2))


def bernoulli_ifs(beta) -> IFS1D:
    """{x/beta, x/beta + 1 - 1/beta} with weights (1/2, 1/2), 1 < beta < 2.

    beta may be a float (floating-point engine only), a Fraction/decimal
    string (exact rational parameters), or a FieldElement (exact algebraic
    parameters, enabling the exact cylinder solver).
    """
    if isinstance(beta, FieldElement):
        if not (beta > 1 and beta.field.sign(beta - 2) < 0):
            raise DomainError("need 1 < beta < 2")
        inv = beta.inverse()
        one = beta.field.one()
        r = beta.field.float_nearest(inv)
        maps = (
            Similarity1D(r, 0.0, inv, beta.field.from_rational(0)),
            Similarity1D(r, 1.0 - r, inv, one - inv),
        )
        return IFS1D(maps, WeightVector.equal(2))
    if isinstance(beta, float):
        if not (1.0 < beta < 2.0):
            raise DomainError("need 1 < beta < 2")
        r = 1.0 / beta
        return IFS1D(
            (Similarity1D(r, 0.0), Similarity1D(r, 1.0 - r)),
            WeightVector.equal(2))
    b = Fraction(beta)
    if not (1 < b < 2):
        raise DomainError("need 1 < beta < 2")
    inv = 1 / b
    r = float(inv)
    maps = (
        Similarity1D(r, 0.0, inv, Fraction(0)),
        Similarity1D(r, float(1 - inv), inv, 1 - inv),
    )
    return IFS1D(maps, WeightVector.equal(2))


def bernoulli_partition(beta: float, N: int, beta_exact=None,
                        cap: Optional[int] = None) -> Partition:
    """Level-N cylinder-endpoint partition of [0, 1] for the Bernoulli
    system, with the endpoint floats produced by division (x/beta, then
    + (1.0 - 1.0/beta)) rather than by multiplication with 1/beta.

    The two recipes differ by an ulp here and there; the published reference
    values for these systems follow the division form, so reproducing them
    bit-for-bit requires it.  beta_exact (Fraction or FieldElement) attaches
    the exactly deduplicated endpoints as well.
    """
    if not (1.0 < beta < 2.0):
        raise DomainError("need 1 < beta < 2")
    if N < 1:
        raise DomainError("partition level must be >= 1")
    cap = endpoint_cap() if cap is None else cap
    if 2 ** (N + 1) > cap:
        raise ResourceLimitError(
            f"level {N} would enumerate {2 ** (N + 1)} endpoints (cap {cap})")
    offc = 1.0 - 1.0 / beta
    pts = [0.0, 1.0]
    for _ in range(N):
        nxt = [x / beta for x in pts]
        nxt.extend(x / beta + offc for x in pts)
        pts = sorted(set(nxt))

    exact_pts = None
    if beta_exact is not None:
        ifs = bernoulli_ifs(beta_exact)
        if isinstance(beta_exact, FieldElement):
            zero, one = beta_exact.field.zero(), beta_exact.field.one()
        else:
            zero, one = Fraction(0), Fraction(1)
        cur = [zero, one]
        for _ in range(N):
            nxt = []
            for m in ifs.maps:
                nxt.extend(m.apply_exact(p) for p in cur)
            cur = _dedup_exact(nxt)
        exact_pts = tuple(_sort_exact(cur))
    return Partition(tuple(pts), exact_pts)


def parse_ifs_file(path: str) -> IFS1D:
    """Text format: one map per line, `ratio offset weight_num/weight_den`;
    blank lines and #-comments ignored; optional `hull lo hi` line is parsed
    and checked against the computed hull.  Decimal ratio/offset strings are
    taken as exact rationals.
    """
    maps = []
    weights = []
    hull_override = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "hull":
                if len(parts) != 3:
                    raise DomainError(f"{path}:{lineno}: hull needs two numbers")
                hull_override = (Fraction(parts[1]), Fraction(parts[2]))
                continue
            if len(parts) != 3:
                raise DomainError(
                    f"{path}:{lineno}: expected `ratio offset weight`, got {raw!r}")
            ratio = Fraction(parts[0])
            offset = Fraction(parts[1])
            weights.append(Fraction(parts[2]))
            maps.append(Similarity1D(float(ratio), float(offset), ratio, offset))
    if not maps:
        raise DomainError(f"{path}: no maps found")
    ifs = IFS1D(maps, WeightVector(weights))
    if hull_override is not None:
        lo, hi = attractor_hull_exact(ifs)
        if (lo, hi) != hull_override:
            raise DomainError(
                f"{path}: declared hull {hull_override} but computed ({lo}, {hi})")
    return ifs

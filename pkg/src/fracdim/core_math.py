"""Scalar building blocks: the entropy kernel, the combined-entropy function,
and the directed-rounding helpers used by every certified computation.

Two arithmetic modes coexist in this package.  The *faithful* mode works in
IEEE-754 binary64 with explicit error accounting (every sum carries an
absolute-error budget, every log is bracketed by a few ulps).  The *exact*
mode works in rational (or algebraic-number) arithmetic and produces error-free
values wherever the orbit structure permits.  This module provides the scalar
pieces for both.

All entropies are in nats; conversion to a dimension happens only at the final
division by a log of a contraction ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DomainError

# Unit roundoff of binary64.
UNIT_ROUNDOFF = 2.0 ** -53
UNIT_ROUNDOFF_FRACTION = Fraction(1, 2 ** 53)

_INF = float("inf")


# ---------------------------------------------------------------------------
# directed rounding helpers
# ---------------------------------------------------------------------------

def next_up(x: float) -> float:
    return math.nextafter(x, _INF)


def next_down(x: float) -> float:
    return math.nextafter(x, -_INF)


def float_down(q) -> float:
    """Largest binary64 value <= q, for q a Fraction (or int).

    float(Fraction) is correctly rounded to nearest, so at most one
    nextafter step is needed; the comparison is exact.
    """
    q = Fraction(q)
    f = float(q)
    if math.isinf(f):
        return math.copysign(1.0, f) * _INF if f < 0 else math.nextafter(_INF, 0.0)
    if Fraction(f) > q:
        f = next_down(f)
    return f


def float_up(q) -> float:
    """Smallest binary64 value >= q, for q a Fraction (or int)."""
    q = Fraction(q)
    f = float(q)
    if math.isinf(f):
        return f if f > 0 else -math.nextafter(_INF, 0.0)
    if Fraction(f) < q:
        f = next_up(f)
    return f


# math.log defers to the platform libm, whose worst observed error is around
# one ulp.  Two nextafter steps therefore bracket the true logarithm with
# margin to spare; the bracket is validated against a high-precision oracle in
# the test suite.

def log_down(x: float) -> float:
    return next_down(next_down(math.log(x)))


def log_up(x: float) -> float:
    return next_up(next_up(math.log(x)))


def div_down(a: float, b: float) -> float:
    """Lower bound on a/b for a >= 0, b > 0 (division is correctly rounded,
    so a single step suffices)."""
    return next_down(a / b)


def div_up(a: float, b: float) -> float:
    return next_up(a / b)


def sum_ordered(values: Iterable[float]) -> float:
    """Plain left-to-right binary64 summation.

    This is deliberately *not* math.fsum or a pairwise reduction: the fixed
    association order makes every reported number bit-reproducible run to run
    and across parallelism levels, and the (n-1)*u*(sum of |terms|) bound used
    in the error ledgers is stated for exactly this order.
    """
    acc = 0.0
    for v in values:
        acc += v
    return acc


def summation_error_bound(n_terms: int, total_abs: float) -> float:
    """Absolute-error bound for left-to-right summation of n_terms values
    whose exact absolute sum is at most total_abs."""
    if n_terms <= 1:
        return 0.0
    return (n_terms - 1) * UNIT_ROUNDOFF * total_abs


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EntropyValue:
    """An entropy-like quantity (nats) with a one-sided-safe error budget.

    The true mathematical quantity lies in [value - abs_error, value + abs_error].
    """

    value: float
    abs_error: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"entropy value must be finite, got {self.value!r}")
        if not (self.abs_error >= 0.0):
            raise DomainError(f"abs_error must be >= 0, got {self.abs_error!r}")

    @property
    def upper(self) -> float:
        return self.value + self.abs_error

    @property
    def lower(self) -> float:
        return self.value - self.abs_error


class WeightVector:
    """An exact probability vector (p_1, ..., p_ell), each p_i in (0, 1]."""

    __slots__ = ("_ps",)

    def __init__(self, weights: Sequence):
        ps = tuple(Fraction(w) for w in weights)
        if len(ps) < 2:
            raise DomainError("a weight vector needs at least two entries")
        for p in ps:
            if not (0 < p <= 1):
                raise DomainError(f"weight {p} outside (0, 1]")
        if sum(ps) != 1:
            raise DomainError(f"weights sum to {sum(ps)}, expected exactly 1")
        self._ps = ps

    @classmethod
    def equal(cls, ell: int) -> "WeightVector":
        return cls([Fraction(1, ell)] * ell)

    @property
    def is_uniform(self) -> bool:
        return all(p == self._ps[0] for p in self._ps)

    def __len__(self):
        return len(self._ps)

    def __getitem__(self, i):
        return self._ps[i]

    def __iter__(self):
        return iter(self._ps)

    def __eq__(self, other):
        return isinstance(other, WeightVector) and self._ps == other._ps

    def __hash__(self):
        return hash(self._ps)

    def __repr__(self):
        return f"WeightVector({[str(p) for p in self._ps]})"

    def floats(self) -> tuple:
        return tuple(float(p) for p in self._ps)


# ---------------------------------------------------------------------------
# the entropy kernel and the combined-entropy function
# ---------------------------------------------------------------------------

def phi(x: float) -> float:
    """Entropy kernel -x*ln(x), extended continuously by phi(0) = 0."""
    if x != x or x < 0.0:
        raise DomainError(f"phi is defined on [0, oo); got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log(x)


def f_ell(xs: Sequence[float]) -> float:
    """s * sum_i phi(x_i / s) with s = sum_i x_i, and 0 when s = 0.

    Nonnegative, zero when all mass sits in one entry, at most s*ln(len(xs)),
    and monotone nondecreasing in each argument.  The summation order is the
    argument order (left to right), so callers that need reproducibility just
    have to present the x_i canonically.
    """
    if len(xs) < 2:
        raise DomainError("f_ell needs at least two entries")
    s = 0.0
    for x in xs:
        if x != x or x < 0.0:
            raise DomainError(f"f_ell arguments must be >= 0; got {x!r}")
        s += x
    if s == 0.0:
        return 0.0
    acc = 0.0
    for x in xs:
        acc += phi(x / s)
    return s * acc

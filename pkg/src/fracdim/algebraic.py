"""Exact arithmetic in a real algebraic number field Q(beta).

beta is described by its monic integer minimal polynomial together with an
isolating rational interval for the real root of interest.  Elements are
polynomials in beta of degree < deg, with Fraction coefficients, reduced
modulo the minimal polynomial.  Because the polynomial is irreducible, a
nonzero element never evaluates to zero at beta, so sign determination
terminates: evaluate the element over the isolating interval with exact
rational interval arithmetic, and shrink the interval (bisection, exact) until
the enclosure excludes zero.

Everything here is exact; no floating-point value ever feeds back into the
algebra.  Floats only come out at the very end through float_bounds().
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence, Tuple

from .core_math import float_down, float_up
from .errors import DomainError, PreconditionError


def _poly_eval_fraction(coeffs: Sequence, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_eval_interval(coeffs: Sequence[Fraction], lo: Fraction, hi: Fraction):
    """Exact range enclosure of a polynomial over [lo, hi] by interval Horner."""
    alo, ahi = Fraction(0), Fraction(0)
    for c in reversed(coeffs):
        # multiply [alo, ahi] by [lo, hi]
        cands = (alo * lo, alo * hi, ahi * lo, ahi * hi)
        alo, ahi = min(cands), max(cands)
        alo, ahi = alo + c, ahi + c
    return alo, ahi


class NumberField:
    """Q(beta) for a designated real root beta of a monic integer polynomial.

    coeffs: polynomial coefficients from constant to leading term; the leading
    coefficient must be 1 (monic) and the polynomial is assumed irreducible
    over Q (true for every minimal polynomial; not re-verified here).
    root_bracket: rational (lo, hi) with a sign change isolating the root.
    """

    def __init__(self, coeffs: Sequence[int], root_bracket: Tuple = None):
        coeffs = [Fraction(c) for c in coeffs]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if len(coeffs) < 2:
            raise DomainError("minimal polynomial must have degree >= 1")
        if coeffs[-1] != 1:
            raise DomainError("minimal polynomial must be monic")
        self.min_poly = tuple(coeffs)
        self.degree = len(coeffs) - 1
        if root_bracket is None:
            root_bracket = self._default_bracket()
        lo, hi = Fraction(root_bracket[0]), Fraction(root_bracket[1])
        flo = _poly_eval_fraction(self.min_poly, lo)
        fhi = _poly_eval_fraction(self.min_poly, hi)
        if flo == 0 or fhi == 0 or (flo < 0) == (fhi < 0):
            raise DomainError(
                f"bracket ({lo}, {hi}) does not strictly isolate a root")
        self._lo, self._hi = lo, hi
        self._sign_lo = -1 if flo < 0 else 1
        # Reduction table: beta^k for k in [degree, 2*degree-2] as tuples of
        # Fractions in the power basis.
        self._powers = self._build_powers()

    def _default_bracket(self):
        # Cauchy bound on root magnitude, then refuse: an explicit bracket is
        # required when we cannot trivially find a sign change on (1, B).
        bound = 1 + max(abs(c) for c in self.min_poly[:-1])
        lo, hi = Fraction(1), Fraction(bound)
        flo = _poly_eval_fraction(self.min_poly, lo)
        fhi = _poly_eval_fraction(self.min_poly, hi)
        if flo != 0 and fhi != 0 and (flo < 0) != (fhi < 0):
            return lo, hi
        raise DomainError(
            "no default root bracket on (1, Cauchy bound); pass root_bracket")

    def _build_powers(self):
        deg = self.degree
        # beta^deg = -(c_0 + c_1 beta + ... + c_{deg-1} beta^{deg-1})
        base = tuple(-c for c in self.min_poly[:-1])
        powers = {deg: base}
        for k in range(deg + 1, 2 * deg - 1):
            prev = powers[k - 1]
            # multiply by beta: shift, then reduce the overflow coefficient
            shifted = (Fraction(0),) + prev[:-1]
            overflow = prev[-1]
            powers[k] = tuple(s + overflow * b for s, b in zip(shifted, base))
        return powers

    # -- element constructors ------------------------------------------------

    def element(self, coeffs) -> "FieldElement":
        cs = list(Fraction(c) for c in coeffs)
        if len(cs) > self.degree:
            raise DomainError("coefficient vector longer than field degree")
        cs += [Fraction(0)] * (self.degree - len(cs))
        return FieldElement(self, tuple(cs))

    def zero(self) -> "FieldElement":
        return self.element([])

    def one(self) -> "FieldElement":
        return self.element([1])

    def gen(self) -> "FieldElement":
        """beta itself."""
        if self.degree == 1:
            return self.element([-self.min_poly[0]])
        return self.element([0, 1])

    def from_rational(self, q) -> "FieldElement":
        return self.element([Fraction(q)])

    # -- root refinement and signs ------------------------------------------

    def refine_root(self, width: Fraction) -> None:
        """Shrink the isolating interval below the requested width (exact
        bisection; midpoints are rational so every evaluation is exact)."""
        while self._hi - self._lo > width:
            mid = (self._lo + self._hi) / 2
            fmid = _poly_eval_fraction(self.min_poly, mid)
            if fmid == 0:
                # cannot happen for an irreducible polynomial of degree >= 2,
                # but keep degree-1 fields honest
                self._lo = self._hi = mid
                return
            if (-1 if fmid < 0 else 1) == self._sign_lo:
                self._lo = mid
            else:
                self._hi = mid

    @property
    def root_bracket(self):
        return self._lo, self._hi

    def sign(self, elem: "FieldElement") -> int:
        if all(c == 0 for c in elem.coeffs):
            return 0
        if all(c == 0 for c in elem.coeffs[1:]):
            return -1 if elem.coeffs[0] < 0 else 1
        width = self._hi - self._lo
        while True:
            lo, hi = _poly_eval_interval(elem.coeffs, self._lo, self._hi)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            width = width / 4
            self.refine_root(width)

    def float_bounds(self, elem: "FieldElement", width=Fraction(1, 2 ** 70)):
        """(lo, hi) binary64 pair certified to bracket the real value."""
        while True:
            lo, hi = _poly_eval_interval(elem.coeffs, self._lo, self._hi)
            if hi - lo <= width:
                return float_down(lo), float_up(hi)
            self.refine_root((self._hi - self._lo) / 4)

    def to_float(self, elem: "FieldElement") -> float:
        lo, hi = self.float_bounds(elem)
        return lo if lo == hi else float((Fraction(lo) + Fraction(hi)) / 2)

    def float_nearest(self, elem: "FieldElement") -> float:
        """The binary64 value nearest the element (ties resolved exactly;
        for irrational elements ties cannot occur)."""
        if all(c == 0 for c in elem.coeffs[1:]):
            return float(elem.coeffs[0])
        width = Fraction(1, 2 ** 70)
        while True:
            lo, hi = self.float_bounds(elem, width)
            if lo == hi:
                return lo
            if math.isfinite(lo) and math.isfinite(hi) \
                    and math.nextafter(lo, math.inf) == hi:
                # adjacent doubles: compare 2*elem against lo+hi exactly
                mid2 = self.from_rational(Fraction(lo) + Fraction(hi))
                return hi if self.sign(elem + elem - mid2) > 0 else lo
            width /= 2 ** 16

    def __eq__(self, other):
        return isinstance(other, NumberField) and self.min_poly == other.min_poly \
            and (self._lo <= other._hi and other._lo <= self._hi)

    def __hash__(self):
        return hash(self.min_poly)

    def __repr__(self):
        cs = [str(c) for c in self.min_poly]
        return f"NumberField(coeffs={cs}, bracket=({self._lo}, {self._hi}))"


class FieldElement:
    """Immutable element of a NumberField, in the power basis."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: NumberField, coeffs: Tuple[Fraction, ...]):
        self.field = field
        self.coeffs = coeffs

    def _coerce(self, other):
        if isinstance(other, FieldElement):
            if other.field is not self.field and other.field != self.field:
                raise PreconditionError("elements of different fields")
            return other
        return self.field.from_rational(other)

    def __add__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field,
                            tuple(a + b for a, b in zip(self.coeffs, o.coeffs)))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field,
                            tuple(a - b for a, b in zip(self.coeffs, o.coeffs)))

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __neg__(self):
        return FieldElement(self.field, tuple(-a for a in self.coeffs))

    def __mul__(self, other):
        o = self._coerce(other)
        deg = self.field.degree
        raw = [Fraction(0)] * (2 * deg - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(o.coeffs):
                if b == 0:
                    continue
                raw[i + j] += a * b
        out = list(raw[:deg])
        for k in range(deg, 2 * deg - 1):
            if raw[k] == 0:
                continue
            for idx, coeff in enumerate(self.field._powers[k]):
                out[idx] += raw[k] * coeff
        return FieldElement(self.field, tuple(out))

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        """Extended Euclid against the minimal polynomial in Q[x]."""
        if all(c == 0 for c in self.coeffs):
            raise ZeroDivisionError("inverse of zero field element")
        # r0 = min_poly, r1 = self; maintain t-coefficients with r = t*self mod m
        r0 = list(self.field.min_poly)
        r1 = list(self.coeffs)
        while r1 and r1[-1] == 0:
            r1.pop()
        t0, t1 = [Fraction(0)], [Fraction(1)]

        def poly_sub(a, b):
            out = [Fraction(0)] * max(len(a), len(b))
            for i, c in enumerate(a):
                out[i] += c
            for i, c in enumerate(b):
                out[i] -= c
            while out and out[-1] == 0:
                out.pop()
            return out

        def poly_mul(a, b):
            out = [Fraction(0)] * (len(a) + len(b) - 1) if a and b else []
            for i, c in enumerate(a):
                if c == 0:
                    continue
                for j, d in enumerate(b):
                    out[i + j] += c * d
            while out and out[-1] == 0:
                out.pop()
            return out

        while r1:
            # divide r0 by r1
            q = []
            rem = list(r0)
            dq = len(rem) - len(r1)
            q = [Fraction(0)] * (dq + 1) if dq >= 0 else []
            while len(rem) >= len(r1) and rem:
                factor = rem[-1] / r1[-1]
                shift = len(rem) - len(r1)
                q[shift] = factor
                for i, c in enumerate(r1):
                    rem[shift + i] -= factor * c
                while rem and rem[-1] == 0:
                    rem.pop()
            r0, r1 = r1, rem
            t0, t1 = t1, poly_sub(t0, poly_mul(q, t1))
        # r0 is now the gcd, a nonzero constant (irreducibility)
        if len(r0) != 1:
            raise PreconditionError(
                "gcd with minimal polynomial not constant; polynomial reducible?")
        inv_const = 1 / r0[0]
        return self.field.element([c * inv_const for c in t0])

    def __truediv__(self, other):
        o = self._coerce(other)
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    # comparisons against elements or rationals, exact via sign()

    def _cmp(self, other) -> int:
        return self.field.sign(self - self._coerce(other))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field == other.field and self.coeffs == other.coeffs
        try:
            o = self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.coeffs == o.coeffs

    def __hash__(self):
        return hash((self.field.min_poly, self.coeffs))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __float__(self):
        return self.field.to_float(self)

    def __repr__(self):
        terms = " + ".join(f"{c}*b^{i}" for i, c in enumerate(self.coeffs) if c != 0)
        return f"<{terms or '0'}>"

    def as_fraction(self) -> Fraction:
        """The element as a plain rational; raises if it is not one."""
        if any(c != 0 for c in self.coeffs[1:]):
            raise DomainError("element is irrational")
        return self.coeffs[0]


def multinacci_field(n: int) -> NumberField:
    """Q(beta_n) where beta_n is the largest root of x^n - x^(n-1) - ... - 1."""
    if n < 2:
        raise DomainError("multinacci index starts at 2")
    coeffs = [-1] * n + [1]
    return NumberField(coeffs, root_bracket=(Fraction(3, 2), Fraction(2)))

"""Scalar arithmetic policy.

Values are kept exact whenever the inputs are rational.  Square roots of
rationals are represented exactly by :class:`Surd`, a sum of terms
``c * sqrt(r)`` with rational ``c`` and square-free integer ``r``.  Square
roots of distinct square-free integers are linearly independent over the
rationals, so equality of surds is decided exactly by comparing terms.
Floats are accepted everywhere and switch the computation to doubles.
"""
from __future__ import annotations

import math
import os
from fractions import Fraction
from functools import lru_cache

from .errors import NotExact

DEFAULT_TOL = 1e-9


def default_tol() -> float:
    """Tolerance for double-precision comparisons (``KGR_TOL`` overrides)."""
    raw = os.environ.get("KGR_TOL")
    if raw:
        return float(raw)
    return DEFAULT_TOL


def parse_rational(value) -> Fraction:
    """Parse ``"p/q"`` strings, integers or decimal numbers into a Fraction."""
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise ValueError(f"cannot parse {value!r} as a rational")


def format_scalar(x):
    """JSON-friendly rendering: exact values as strings, floats as floats."""
    if isinstance(x, float):
        return x
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    return str(x)


@lru_cache(maxsize=None)
def squarefree_split(n: int) -> tuple[int, int]:
    """Return ``(s, r)`` with ``n == s*s*r`` and ``r`` square-free."""
    if n <= 0:
        raise ValueError("squarefree_split needs a positive integer")
    s, r = 1, 1
    m = n
    p = 2
    # trial division up to the cube root; what remains has at most two
    # prime factors, so it is square-free unless it is a perfect square
    while p * p * p <= m:
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            s *= p ** (e // 2)
            if e % 2:
                r *= p
        p += 1 if p == 2 else 2
    q = math.isqrt(m)
    if q * q == m:
        s *= q
    else:
        r *= m
    return s, r


class Surd:
    """Exact element of the field generated by square roots of rationals."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict):
        self.terms = terms

    # construction -------------------------------------------------------
    @staticmethod
    def make(terms: dict):
        clean = {r: c for r, c in terms.items() if c}
        if not clean:
            return Fraction(0)
        if len(clean) == 1 and 1 in clean:
            return clean[1]
        return Surd(clean)

    @staticmethod
    def sqrt(q) -> "Fraction | Surd":
        q = Fraction(q)
        if q < 0:
            raise ValueError("square root of a negative number")
        if q == 0:
            return Fraction(0)
        num = q.numerator * q.denominator
        s, r = squarefree_split(num)
        return Surd.make({r: Fraction(s, q.denominator)})

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Surd):
            return other.terms
        if isinstance(other, (int, Fraction)):
            return {1: Fraction(other)}
        return None

    def __neg__(self):
        return Surd({r: -c for r, c in self.terms.items()})

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, float):
            return float(self) + other
        t = self._coerce(other)
        if t is None:
            return NotImplemented
        out = dict(self.terms)
        for r, c in t.items():
            out[r] = out.get(r, 0) + c
        return Surd.make(out)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, float):
            return float(self) - other
        t = self._coerce(other)
        if t is None:
            return NotImplemented
        out = dict(self.terms)
        for r, c in t.items():
            out[r] = out.get(r, 0) - c
        return Surd.make(out)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, float):
            return float(self) * other
        t = self._coerce(other)
        if t is None:
            return NotImplemented
        out: dict = {}
        for r1, c1 in self.terms.items():
            for r2, c2 in t.items():
                g = math.gcd(r1, r2)
                r = (r1 // g) * (r2 // g)
                out[r] = out.get(r, 0) + c1 * c2 * g
        return Surd.make(out)

    __rmul__ = __mul__

    def inverse(self):
        if not self.is_monomial():
            raise NotExact("inverse of a multi-term surd is not supported")
        (r, c), = self.terms.items()
        # 1/(c sqrt r) = sqrt(r) / (c r)
        return Surd.make({r: 1 / (c * r)})

    def __truediv__(self, other):
        if isinstance(other, float):
            return float(self) / other
        if isinstance(other, (int, Fraction)):
            return Surd.make({r: c / other for r, c in self.terms.items()})
        if isinstance(other, Surd):
            return self * other.inverse()
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, float):
            return other / float(self)
        if isinstance(other, (int, Fraction)):
            return self.inverse() * other
        return NotImplemented

    # comparison ---------------------------------------------------------
    def __float__(self):
        return float(sum(float(c) * math.sqrt(r) for r, c in self.terms.items()))

    def __eq__(self, other):
        if isinstance(other, float):
            return float(self) == other
        t = self._coerce(other)
        if t is None:
            return NotImplemented
        return {r: c for r, c in t.items() if c} == self.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __abs__(self):
        return -self if float(self) < 0 else self

    def __lt__(self, other):
        return float(self) < float(other)

    def __le__(self, other):
        return float(self) <= float(other)

    def __gt__(self, other):
        return float(self) > float(other)

    def __ge__(self, other):
        return float(self) >= float(other)

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"Surd({self})"

    def __str__(self):
        parts = []
        for r in sorted(self.terms):
            c = self.terms[r]
            if r == 1:
                parts.append(str(c))
            elif c == 1:
                parts.append(f"sqrt({r})")
            elif c == -1:
                parts.append(f"-sqrt({r})")
            else:
                parts.append(f"{c}*sqrt({r})")
        return " + ".join(parts)


def sqrt(x):
    """Square root following the numeric policy (exact for rationals)."""
    if isinstance(x, float):
        return math.sqrt(x)
    if isinstance(x, (int, Fraction)):
        return Surd.sqrt(x)
    if isinstance(x, Surd):
        raise NotExact(f"square root of the irrational value {x}")
    return math.sqrt(x)


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, Surd))


def magnitude(x) -> float:
    """Absolute value as a float; exactly 0.0 for exact zeros."""
    if is_exact(x) and x == 0:
        return 0.0
    return abs(float(x))


def sign(x) -> int:
    if is_exact(x) and x == 0:
        return 0
    f = float(x)
    return (f > 0) - (f < 0)


def to_float(x) -> float:
    return float(x)

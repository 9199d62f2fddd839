"""Exact arithmetic helpers: rationals and sums of square roots.

Geometric quantities are rationals except for distances and lengths,
which are sums of terms q*sqrt(n).  Radical values keep each term
indexed by the squarefree core of its radicand, so equality with zero
is a syntactic check (sqrt of distinct squarefree integers is linearly
independent over Q) and nonzero signs are decided by integer interval
refinement, which always terminates.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

Rat = Fraction


def to_rat(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not an exact rational: {value!r}")


_FACTOR_CAP = 10_000


@lru_cache(maxsize=None)
def squarefree_core(n: int) -> tuple[int, int]:
    """Split n > 0 into (f, s) with n = f^2 * s, s squarefree up to the
    trial-division cap.

    Beyond the cap a remaining cofactor is kept opaque (after a perfect
    square check), so cores of huge radicands may fail to merge; sign
    refinement stays correct but equality detection can degrade to the
    bounded-precision guard.
    """
    if n <= 0:
        raise ValueError("radicand must be positive")
    f, s = 1, 1
    d = 2
    while d * d <= n and d <= _FACTOR_CAP:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            f *= d ** (e // 2)
            if e % 2:
                s *= d
        d += 1 if d == 2 else 2
    if n > 1:
        r = math.isqrt(n)
        if r * r == n:
            f *= r
        else:
            s *= n
    return f, s


class Radical:
    """Exact value of the form sum_i c_i * sqrt(s_i), c_i rational, s_i squarefree.

    The rational part is the term with s_i = 1.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict[int, Fraction] | None = None):
        self.terms = {s: c for s, c in (terms or {}).items() if c != 0}

    @staticmethod
    def from_rat(q) -> "Radical":
        q = to_rat(q)
        return Radical({1: q} if q else {})

    @staticmethod
    def sqrt_of_rat(q) -> "Radical":
        q = to_rat(q)
        if q < 0:
            raise ValueError("square root of a negative value")
        if q == 0:
            return Radical()
        # sqrt(p/q) = sqrt(p*q)/q
        f, s = squarefree_core(q.numerator * q.denominator)
        return Radical({s: Fraction(f, q.denominator)})

    @property
    def is_rational(self) -> bool:
        return all(s == 1 for s in self.terms)

    def as_rat(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"not rational: {self}")
        return self.terms.get(1, Fraction(0))

    def __add__(self, other: "Radical") -> "Radical":
        out = dict(self.terms)
        for s, c in other.terms.items():
            out[s] = out.get(s, Fraction(0)) + c
        return Radical(out)

    def __neg__(self) -> "Radical":
        return Radical({s: -c for s, c in self.terms.items()})

    def __sub__(self, other: "Radical") -> "Radical":
        return self + (-other)

    def __mul__(self, other: "Radical") -> "Radical":
        out: dict[int, Fraction] = {}
        for s1, c1 in self.terms.items():
            for s2, c2 in other.terms.items():
                # sqrt(s1)*sqrt(s2) = g*sqrt(s1*s2/g^2) with g = gcd part
                f, s = squarefree_core(s1 * s2)
                coeff = c1 * c2 * f
                out[s] = out.get(s, Fraction(0)) + coeff
        return Radical(out)

    def __truediv__(self, other: "Radical") -> "Radical":
        if not other.terms:
            raise ZeroDivisionError("division by zero")
        if other.is_rational:
            q = other.as_rat()
            return Radical({s: c / q for s, c in self.terms.items()})
        if len(other.terms) == 1:
            ((s, c),) = other.terms.items()
            # 1/(c*sqrt(s)) = sqrt(s)/(c*s)
            return self * Radical({s: Fraction(1, 1) / (c * s)})
        raise ValueError("division by a multi-term radical is unsupported")

    def sqrt(self) -> "Radical":
        if self.is_rational:
            return Radical.sqrt_of_rat(self.as_rat())
        raise ValueError("nested square root of an irrational value")

    def sign(self) -> int:
        terms = self.terms
        if not terms:
            return 0
        if len(terms) == 1:
            ((_, c),) = terms.items()
            return 1 if c > 0 else -1
        # Distinct squarefree cores are linearly independent over Q, so a
        # multi-term value is nonzero and interval refinement terminates.
        # Opaque (uncapped-factorization) cores could in principle hide a
        # zero; the precision guard turns that into an error instead of a
        # silent loop.
        bits = 32
        while bits <= 1 << 14:
            scale = 1 << bits
            lo = Fraction(0)
            hi = Fraction(0)
            for s, c in terms.items():
                r = math.isqrt(s * scale * scale)  # r <= sqrt(s)*scale < r+1
                rl, rh = Fraction(r, scale), Fraction(r + 1, scale)
                if c >= 0:
                    lo += c * rl
                    hi += c * rh
                else:
                    lo += c * rh
                    hi += c * rl
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            bits *= 2
        raise ValueError(f"sign undecided at precision cap; radicands too large: {self!r}")

    def compare(self, other: "Radical") -> int:
        return (self - other).sign()

    def __eq__(self, other) -> bool:
        return isinstance(other, Radical) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __lt__(self, other):
        return self.compare(other) < 0

    def __le__(self, other):
        return self.compare(other) <= 0

    def __float__(self) -> float:
        return sum(float(c) * math.sqrt(s) for s, c in self.terms.items())

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for s in sorted(self.terms):
            c = self.terms[s]
            parts.append(str(c) if s == 1 else f"{c}*sqrt({s})")
        return " + ".join(parts)


ZERO = Radical()

"""Sparse multivariate polynomials over exact rationals.

Monomials are tuples of (variable, exponent) pairs sorted by variable name;
point variables appear as coordinate names like "p.x".  Degrees stay small
(the elimination engine enforces <= 2 per quantified variable) but the
number of free symbols can be a dozen or more.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

from .exactmath import to_rat

Monom = tuple[tuple[str, int], ...]


class Poly:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms: dict[Monom, Fraction] | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c != 0}
        self._hash = None

    @staticmethod
    def const(v) -> "Poly":
        v = to_rat(v)
        return Poly({(): v} if v else {})

    @staticmethod
    def var(name: str) -> "Poly":
        return Poly({((name, 1),): Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def as_const(self) -> Fraction | None:
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        return None

    def variables(self) -> set[str]:
        out: set[str] = set()
        for m in self.terms:
            for v, _ in m:
                out.add(v)
        return out

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Poly(out)

    def __sub__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) - c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[Monom, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mul_monoms(m1, m2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Poly(out)

    def scale(self, q) -> "Poly":
        q = to_rat(q)
        if q == 0:
            return Poly()
        return Poly({m: c * q for m, c in self.terms.items()})

    def square(self) -> "Poly":
        return self * self

    def degree_in(self, var: str) -> int:
        d = 0
        for m in self.terms:
            for v, e in m:
                if v == var:
                    d = max(d, e)
        return d

    def coeffs_in(self, var: str, max_degree: int = 2) -> list["Poly"]:
        """Coefficient polynomials [c0, c1, ..] of var; raises on high degree."""
        d = self.degree_in(var)
        if d > max_degree:
            raise DegreeTooHigh(f"degree {d} in {var} exceeds {max_degree}")
        out = [dict() for _ in range(d + 1)]
        for m, c in self.terms.items():
            e = 0
            rest = []
            for v, k in m:
                if v == var:
                    e = k
                else:
                    rest.append((v, k))
            rest_m = tuple(rest)
            out[e][rest_m] = out[e].get(rest_m, Fraction(0)) + c
        return [Poly(d_) for d_ in out]

    def eval(self, env: dict[str, Fraction]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            v = c
            for name, e in m:
                v *= env[name] ** e
            total += v
        return total

    def eval_partial(self, env: dict[str, Fraction]) -> "Poly":
        out: dict[Monom, Fraction] = {}
        for m, c in self.terms.items():
            rest = []
            for name, e in m:
                if name in env:
                    c = c * env[name] ** e
                else:
                    rest.append((name, e))
            if c == 0:
                continue
            rm = tuple(rest)
            out[rm] = out.get(rm, Fraction(0)) + c
        return Poly(out)

    def normalized(self, keep_sign: bool) -> "Poly":
        """Divide by the positive integer content; optionally fix the leading
        monomial's coefficient positive (valid for = and !=)."""
        if not self.terms:
            return self
        num_gcd = 0
        den_lcm = 1
        for c in self.terms.values():
            num_gcd = gcd(num_gcd, abs(c.numerator))
            den_lcm = den_lcm * c.denominator // gcd(den_lcm, c.denominator)
        scale = Fraction(den_lcm, num_gcd) if num_gcd else Fraction(1)
        out = self.scale(scale)
        if not keep_sign:
            lead = min(out.terms)
            if out.terms[lead] < 0:
                out = -out
        return out

    def key(self) -> tuple:
        return tuple(sorted((m, c) for m, c in self.terms.items()))

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms):
            c = self.terms[m]
            mono = "*".join(f"{v}^{e}" if e > 1 else v for v, e in m)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


class DegreeTooHigh(Exception):
    pass


def _mul_monoms(m1: Monom, m2: Monom) -> Monom:
    if not m1:
        return m2
    if not m2:
        return m1
    out: dict[str, int] = {}
    for v, e in m1:
        out[v] = out.get(v, 0) + e
    for v, e in m2:
        out[v] = out.get(v, 0) + e
    return tuple(sorted(out.items()))


ZERO = Poly()
ONE = Poly.const(1)

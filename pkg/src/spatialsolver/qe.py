"""Quantifier elimination for base-predicate subproblems.

The symbolic engine is virtual substitution over formulas whose quantified
variables occur at most quadratically: innermost-out, per variable, with
test points drawn from atom roots (exact for weak relations, epsilon-shifted
for strict ones) plus minus infinity.  Square roots are lowered to fresh
existential variables; base predicates lower to sign conditions.  Everything
is exact; a grid-plus-random sampling oracle provides the approximate
fallback and the test-side cross-check.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional

from . import formulas as F
from . import geometry as G
from .exactmath import Radical
from .polys import DegreeTooHigh, Poly

# Internal quantifier-free formulas are nested tuples:
#   ("T",) | ("F",) | ("A", PolyAtom) | ("&", (children,)) | ("|", (children,))
QF_TRUE = ("T",)
QF_FALSE = ("F",)


@dataclass(frozen=True)
class PolyAtom:
    poly: Poly
    rel: str  # '<', '<=', '=', '!='

    def normalized(self) -> "PolyAtom":
        return PolyAtom(self.poly.normalized(keep_sign=self.rel in ("<", "<=")), self.rel)


class UnsupportedForm(Exception):
    pass


class BudgetExceeded(Exception):
    pass


@dataclass
class QEStats:
    elimination_steps: int = 0
    case_count: int = 0
    atom_count: int = 0


@dataclass
class QETask:
    problem: F.Prenex
    time_budget: float = 5.0
    mode: str = "symbolic"  # or "numeric-fallback"


@dataclass
class QFSolution:
    formula: F.Formula
    exactness: str  # "exact" | "approximate"
    stats: QEStats = field(default_factory=QEStats)


SOLUTION_CLAUSE_CAP = 10_000
HARD_ATOM_CAP = 200_000


def atom(poly: Poly, rel: str):
    c = poly.as_const()
    if c is not None:
        sat = {"<": c < 0, "<=": c <= 0, "=": c == 0, "!=": c != 0}[rel]
        return QF_TRUE if sat else QF_FALSE
    return ("A", PolyAtom(poly, rel).normalized())


def qf_and(items) -> tuple:
    out = []
    seen = set()
    for it in items:
        if it == QF_TRUE:
            continue
        if it == QF_FALSE:
            return QF_FALSE
        kids = it[1] if it[0] == "&" else (it,)
        for k in kids:
            if k not in seen:
                seen.add(k)
                out.append(k)
    # cheap contradiction scan on normalized atoms
    rels: dict[tuple, set[str]] = {}
    for k in out:
        if k[0] == "A":
            rels.setdefault(k[1].poly.key(), set()).add(k[1].rel)
    for key, rs in rels.items():
        if ("<" in rs or "<=" in rs) and "=" in rs and "<" in rs:
            return QF_FALSE
        if "=" in rs and "!=" in rs:
            return QF_FALSE
    neg_keys = {(tuple((m, -c) for m, c in key)): rs for key, rs in rels.items()}
    for key, rs in rels.items():
        opp = tuple(sorted((m, -c) for m, c in key))
        if opp in {tuple(sorted(k)): None for k in rels}:
            pass
    if not out:
        return QF_TRUE
    if len(out) == 1:
        return out[0]
    return ("&", tuple(out))


def qf_or(items) -> tuple:
    out = []
    seen = set()
    for it in items:
        if it == QF_FALSE:
            continue
        if it == QF_TRUE:
            return QF_TRUE
        kids = it[1] if it[0] == "|" else (it,)
        for k in kids:
            if k not in seen:
                seen.add(k)
                out.append(k)
    if not out:
        return QF_FALSE
    if len(out) == 1:
        return out[0]
    return ("|", tuple(out))


def neg_atom(a: PolyAtom):
    if a.rel == "<":
        return atom(-a.poly, "<=")
    if a.rel == "<=":
        return atom(-a.poly, "<")
    if a.rel == "=":
        return atom(a.poly, "!=")
    return atom(a.poly, "=")


def qf_not(f) -> tuple:
    if f == QF_TRUE:
        return QF_FALSE
    if f == QF_FALSE:
        return QF_TRUE
    if f[0] == "A":
        return neg_atom(f[1])
    if f[0] == "&":
        return qf_or(qf_not(c) for c in f[1])
    if f[0] == "|":
        return qf_and(qf_not(c) for c in f[1])
    raise ValueError(f"bad qf node {f!r}")


def qf_atoms(f) -> Iterable[PolyAtom]:
    if f[0] == "A":
        yield f[1]
    elif f[0] in ("&", "|"):
        for c in f[1]:
            yield from qf_atoms(c)


def qf_size(f) -> int:
    return sum(1 for _ in qf_atoms(f))


def qf_map_atoms(f, fn: Callable[[PolyAtom], tuple]) -> tuple:
    if f in (QF_TRUE, QF_FALSE):
        return f
    if f[0] == "A":
        return fn(f[1])
    if f[0] == "&":
        return qf_and(qf_map_atoms(c, fn) for c in f[1])
    if f[0] == "|":
        return qf_or(qf_map_atoms(c, fn) for c in f[1])
    raise ValueError(f"bad qf node {f!r}")


def qf_eval(f, env: dict[str, Fraction]) -> bool:
    if f == QF_TRUE:
        return True
    if f == QF_FALSE:
        return False
    if f[0] == "A":
        v = f[1].poly.eval(env)
        return {"<": v < 0, "<=": v <= 0, "=": v == 0, "!=": v != 0}[f[1].rel]
    if f[0] == "&":
        return all(qf_eval(c, env) for c in f[1])
    if f[0] == "|":
        return any(qf_eval(c, env) for c in f[1])
    raise ValueError(f"bad qf node {f!r}")


# ---------------------------------------------------------------------------
# Lowering: formula-core matrices to internal QF formulas over polynomial
# atoms.  Point variables split into coordinate scalars; square roots become
# fresh existential variables appended innermost.


class Lowering:
    def __init__(self):
        self.aux: list[tuple[str, tuple]] = []  # (var, side-condition qf)
        self._n = 0

    def fresh_aux(self) -> str:
        self._n += 1
        return f"$sqrt{self._n}"

    def term(self, t: F.Term) -> tuple[Poly, Poly]:
        """Returns (num, den) with den a nonzero-guarded polynomial."""
        if isinstance(t, F.Const):
            return Poly.const(t.value), Poly.const(1)
        if isinstance(t, F.Sym):
            return Poly.var(t.name), Poly.const(1)
        if isinstance(t, F.Coord):
            return Poly.var(f"{t.point}.{t.axis}"), Poly.const(1)
        if isinstance(t, F.BinOp):
            n1, d1 = self.term(t.left)
            n2, d2 = self.term(t.right)
            if t.op == "+":
                return n1 * d2 + n2 * d1, d1 * d2
            if t.op == "-":
                return n1 * d2 - n2 * d1, d1 * d2
            if t.op == "*":
                return n1 * n2, d1 * d2
            if t.op == "/":
                if n2.is_zero():
                    raise F.EvaluationError(f"division by zero in {F.term_str(t)}")
                return n1 * d2, d1 * n2
            raise UnsupportedForm(f"operator {t.op}")
        if isinstance(t, F.SqrtT):
            n, d = self.term(t.arg)
            dc = d.as_const()
            if dc is None:
                raise UnsupportedForm("square root of a quotient with symbolic denominator")
            arg = n.scale(Fraction(1) / dc)
            u = self.fresh_aux()
            uv = Poly.var(u)
            side = qf_and([atom(-uv, "<="), atom(uv * uv - arg, "=")])
            self.aux.append((u, side))
            return uv, Poly.const(1)
        raise UnsupportedForm(f"term {t!r}")

    def rel_atom(self, a: F.Rel) -> tuple:
        n1, d1 = self.term(a.lhs)
        n2, d2 = self.term(a.rhs)
        num = n1 * d2 - n2 * d1
        den = d1 * d2
        dc = den.as_const()
        if dc is not None:
            if dc == 0:
                raise F.EvaluationError("division by zero")
            if dc < 0:
                num = -num
            return self._num_rel(num, a.op)
        # symbolic denominator: sign split, den != 0 required
        pos = qf_and([atom(-den, "<"), self._num_rel(num, a.op)])
        negd = qf_and([atom(den, "<"), self._num_rel(-num, a.op)])
        return qf_or([pos, negd])

    @staticmethod
    def _num_rel(num: Poly, op: str) -> tuple:
        if op == "<":
            return atom(num, "<")
        if op == "<=":
            return atom(num, "<=")
        if op == ">":
            return atom(-num, "<")
        if op == ">=":
            return atom(-num, "<=")
        if op == "=":
            return atom(num, "=")
        if op == "!=":
            return atom(num, "!=")
        raise UnsupportedForm(f"relation {op}")

    def _parg_coords(self, arg) -> tuple[Poly, Poly]:
        if isinstance(arg, F.PVar):
            return Poly.var(f"{arg.name}.x"), Poly.var(f"{arg.name}.y")
        if isinstance(arg, F.PLit):
            return Poly.const(arg.x), Poly.const(arg.y)
        raise UnsupportedForm(f"point argument {arg!r}")

    def _cross(self, a, b, p) -> Poly:
        ax, ay = a
        bx, by = b
        px, py = p
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax)

    def _dot_from(self, o, a, b) -> Poly:
        ox, oy = o
        ax, ay = a
        bx, by = b
        return (ax - ox) * (bx - ox) + (ay - oy) * (by - oy)

    def on_segment(self, p, seg: F.SegArg) -> tuple:
        pc = self._parg_coords(p)
        a = self._parg_coords(seg.a)
        b = self._parg_coords(seg.b)
        return qf_and([
            atom(self._cross(a, b, pc), "="),
            atom(-self._dot_from(a, pc, b), "<="),
            atom(-self._dot_from(b, pc, a), "<="),
        ])

    def inside_triangle(self, p, tri: F.TriArg, closed: bool = True) -> tuple:
        pc = self._parg_coords(p)
        pts = [self._parg_coords(x) for x in (tri.a, tri.b, tri.c)]
        rel = "<=" if closed else "<"
        conds = []
        # orientation guard; instances are CCW by construction
        area2 = self._cross(pts[0], pts[1], pts[2])
        conds.append(atom(-area2, "<="))
        for u, v in ((0, 1), (1, 2), (2, 0)):
            conds.append(atom(-self._cross(pts[u], pts[v], pc), rel))
        return qf_and(conds)

    def pred_atom(self, a: F.Pred) -> tuple:
        if a.name == "On":
            target = a.args[1]
            if isinstance(target, F.SegArg):
                return self.on_segment(a.args[0], target)
            if isinstance(target, F.CurveArg):
                vs = target.vertices
                return qf_or(self.on_segment(a.args[0], F.SegArg(u, v))
                             for u, v in zip(vs, vs[1:]))
        if a.name == "Inside":
            target = a.args[1]
            if isinstance(target, F.TriArg):
                return self.inside_triangle(a.args[0], target)
            if isinstance(target, F.RegionArg):
                return qf_or(self.inside_triangle(a.args[0], t) for t in target.triangles)
        raise UnsupportedForm(f"predicate {a.name} cannot be lowered; expand it first")

    def formula(self, f: F.Formula, polarity: bool = True) -> tuple:
        if isinstance(f, F.FAtom):
            a = f.atom
            out = self.rel_atom(a) if isinstance(a, F.Rel) else self.pred_atom(a)
            return out if polarity else qf_not(out)
        if isinstance(f, F.FNot):
            return self.formula(f.body, not polarity)
        if isinstance(f, F.FAnd):
            parts = [self.formula(c, polarity) for c in f.children]
            return qf_and(parts) if polarity else qf_or(parts)
        if isinstance(f, F.FOr):
            parts = [self.formula(c, polarity) for c in f.children]
            return qf_or(parts) if polarity else qf_and(parts)
        if isinstance(f, F.FQuant):
            raise UnsupportedForm("quantifier inside a matrix; prenex first")
        raise UnsupportedForm(f"formula {f!r}")


def lower_matrix(matrix: F.Formula) -> tuple[tuple, list[tuple[str, tuple]]]:
    lw = Lowering()
    qf = lw.formula(matrix)
    return qf, lw.aux


def lower_sqrt(matrix: F.Formula) -> tuple[F.Formula, list[str]]:
    """Public sqrt-lowering: replaces each sqrt with a fresh existential
    scalar constrained by u >= 0 and u^2 = radicand, appended innermost.

    Returns the rewritten matrix (with $sqrtN symbols) and the new variable
    names; used directly by tests, mirrored inside the engine's lowering.
    """
    counter = [0]
    names: list[str] = []
    sides: list[F.Formula] = []

    def walk_term(t: F.Term) -> F.Term:
        if isinstance(t, F.BinOp):
            return F.BinOp(t.op, walk_term(t.left), walk_term(t.right))
        if isinstance(t, F.SqrtT):
            arg = walk_term(t.arg)
            counter[0] += 1
            name = f"$sqrt{counter[0]}"
            names.append(name)
            u = F.Sym(name)
            sides.append(F.conj([
                F.FAtom(F.Rel(">=", u, F.const(0))),
                F.FAtom(F.Rel("=", F.mul(u, u), arg)),
            ]))
            return u
        return t

    def walk(f: F.Formula) -> F.Formula:
        if isinstance(f, F.FAtom):
            a = f.atom
            if isinstance(a, F.Rel):
                return F.FAtom(F.Rel(a.op, walk_term(a.lhs), walk_term(a.rhs)))
            return f
        if isinstance(f, F.FNot):
            return F.FNot(walk(f.body))
        if isinstance(f, F.FAnd):
            return F.conj([walk(c) for c in f.children])
        if isinstance(f, F.FOr):
            return F.disj([walk(c) for c in f.children])
        raise UnsupportedForm("matrix expected")

    out = walk(matrix)
    if sides:
        out = F.conj(sides + [out])
    return out, names


# ---------------------------------------------------------------------------
# Virtual substitution


@dataclass(frozen=True)
class Rational:
    num: Poly
    den: Poly  # guarded nonzero
    eps: bool = False


@dataclass(frozen=True)
class Root:
    a: Poly
    b: Poly
    c: Poly
    sign: int  # +1 / -1
    eps: bool = False

    @property
    def disc(self) -> Poly:
        return self.b * self.b - (self.a * self.c).scale(4)


@dataclass(frozen=True)
class MinusInf:
    pass


def _subst_rational(p: Poly, var: str, num: Poly, den: Poly) -> Poly:
    coeffs = p.coeffs_in(var)
    d = len(coeffs) - 1
    out = Poly()
    for k, ck in enumerate(coeffs):
        term = ck
        for _ in range(k):
            term = term * num
        for _ in range(d - k):
            term = term * den
        out = out + term
    if d % 2 == 1:
        out = out * den
    return out


def _atom_at_rational(a: PolyAtom, var: str, cand: Rational) -> tuple:
    if a.poly.degree_in(var) == 0:
        return ("A", a)
    return atom(_subst_rational(a.poly, var, cand.num, cand.den), a.rel)


def _root_AB(p: Poly, var: str, r: Root) -> tuple[Poly, Poly]:
    """p at the root, scaled by (2a)^2: returns (A, B) with value A + B*sqrt(D)."""
    coeffs = p.coeffs_in(var)
    d = len(coeffs) - 1
    a2 = r.a.scale(2)
    if d == 0:
        return coeffs[0] * a2 * a2, Poly()
    if d == 1:
        c0, c1 = coeffs
        A = a2 * (a2 * c0 - c1 * r.b)
        B = (a2 * c1).scale(r.sign)
        return A, B
    c0, c1, c2 = coeffs
    D = r.disc
    A = c2 * r.b * r.b + c2 * D - (r.a * r.b * c1).scale(2) + (r.a * r.a * c0).scale(4)
    B = ((r.a * c1).scale(2) - (r.b * c2).scale(2)).scale(r.sign)
    return A, B


def _sqrt_sign_formula(A: Poly, B: Poly, D: Poly, rel: str) -> tuple:
    """Sign conditions for A + B*sqrt(D) rel 0, assuming D >= 0."""
    E = A * A - B * B * D
    if rel == "=":
        return qf_and([atom(A * B, "<="), atom(E, "=")])
    if rel == "!=":
        return qf_or([atom(-(A * B), "<"), atom(E, "!=")])
    if rel == "<=":
        return qf_or([
            qf_and([atom(A, "<="), atom(-E, "<=")]),
            qf_and([atom(B, "<="), atom(E, "<=")]),
        ])
    if rel == "<":
        return qf_or([
            qf_and([atom(A, "<"), atom(-E, "<")]),
            qf_and([atom(B, "<"), atom(E, "<")]),
            qf_and([atom(A, "<"), atom(B, "<")]),
        ])
    raise ValueError(rel)


def _atom_at_root(a: PolyAtom, var: str, r: Root) -> tuple:
    if a.poly.degree_in(var) == 0:
        return ("A", a)
    A, B = _root_AB(a.poly, var, r)
    return _sqrt_sign_formula(A, B, r.disc, a.rel)


def _atom_at_minus_inf(a: PolyAtom, var: str) -> tuple:
    coeffs = a.poly.coeffs_in(var)
    if len(coeffs) == 1:
        return ("A", a)
    # sign at -inf: leading coefficient with parity of its degree
    signed = [ck if k % 2 == 0 else -ck for k, ck in enumerate(coeffs)]
    if a.rel == "=":
        return qf_and([atom(ck, "=") for ck in coeffs])
    if a.rel == "!=":
        return qf_or([atom(ck, "!=") for ck in coeffs])
    strict = a.rel == "<"
    out = QF_FALSE if strict else None
    # build nested cases from highest degree down
    cases = []
    higher_zero: list[tuple] = []
    for k in range(len(signed) - 1, 0, -1):
        cases.append(qf_and(higher_zero + [atom(signed[k], "<")]))
        higher_zero.append(atom(signed[k], "="))
    cases.append(qf_and(higher_zero + [atom(signed[0], a.rel)]))
    return qf_or(cases)


def _derivative(p: Poly, var: str) -> Poly:
    coeffs = p.coeffs_in(var)
    out = Poly()
    xv = Poly.var(var)
    for k in range(1, len(coeffs)):
        term = coeffs[k].scale(k)
        for _ in range(k - 1):
            term = term * xv
        out = out + term
    return out


def _atom_at_eps(a: PolyAtom, var: str, base_subst: Callable[[PolyAtom], tuple]) -> tuple:
    """a at (theta + epsilon): sign from (p, p', p'') at theta."""
    if a.poly.degree_in(var) == 0:
        return ("A", a)
    p0 = a.poly
    p1 = _derivative(p0, var)
    p2 = _derivative(p1, var)

    def at(p: Poly, rel: str) -> tuple:
        c = p.as_const()
        if p.degree_in(var) == 0 and c is None:
            return atom(p, rel)
        if c is not None:
            return atom(p, rel)
        return base_subst(PolyAtom(p, rel))

    all_zero = qf_and([at(p0, "="), at(p1, "="), at(p2, "=")])
    if a.rel == "=":
        return all_zero
    if a.rel == "!=":
        return qf_not(all_zero)
    strictly_neg = qf_or([
        at(p0, "<"),
        qf_and([at(p0, "="), at(p1, "<")]),
        qf_and([at(p0, "="), at(p1, "="), at(p2, "<")]),
    ])
    if a.rel == "<":
        return strictly_neg
    return qf_or([strictly_neg, all_zero])


def _substitute_candidate(f, var: str, cand) -> tuple:
    if isinstance(cand, MinusInf):
        return qf_map_atoms(f, lambda a: _atom_at_minus_inf(a, var))
    if isinstance(cand, Rational):
        if cand.eps:
            return qf_map_atoms(
                f, lambda a: _atom_at_eps(
                    a, var, lambda aa: _atom_at_rational(aa, var, cand)))
        return qf_map_atoms(f, lambda a: _atom_at_rational(a, var, cand))
    if isinstance(cand, Root):
        if cand.eps:
            return qf_map_atoms(
                f, lambda a: _atom_at_eps(
                    a, var, lambda aa: _atom_at_root(aa, var, cand)))
        return qf_map_atoms(f, lambda a: _atom_at_root(a, var, cand))
    raise ValueError(cand)


def _candidates(f, var: str) -> list[tuple[tuple, object]]:
    """Test points with guards for eliminating an existential variable."""
    out: list[tuple[tuple, object]] = [(QF_TRUE, MinusInf())]
    seen: set = set()
    for a in qf_atoms(f):
        d = a.poly.degree_in(var)
        if d == 0:
            continue
        strict = a.rel in ("<", "!=")
        coeffs = a.poly.coeffs_in(var)
        key = (tuple(c.key() for c in coeffs), strict)
        if key in seen:
            continue
        seen.add(key)
        if d == 1:
            c0, c1 = coeffs
            guard = _nonzero_guard(c1)
            if guard is not None:
                out.append((guard, Rational(-c0, c1, eps=strict)))
        else:
            c0, c1, c2 = coeffs
            disc = c1 * c1 - (c2 * c0).scale(4)
            g2 = _nonzero_guard(c2)
            if g2 is not None:
                dguard = atom(-disc, "<=")
                for s in (1, -1):
                    out.append((qf_and([g2, dguard]), Root(c2, c1, c0, s, eps=strict)))
            # degenerate leading coefficient: linear fallback
            c2c = c2.as_const()
            if c2c is None:
                g1 = _nonzero_guard(c1)
                if g1 is not None:
                    out.append((qf_and([atom(c2, "="), g1]),
                                Rational(-c0, c1, eps=strict)))
    return out


def _nonzero_guard(p: Poly) -> Optional[tuple]:
    c = p.as_const()
    if c is not None:
        return QF_TRUE if c != 0 else None
    return atom(p, "!=")


class Deadline:
    def __init__(self, seconds: float | None):
        self.t_end = None if seconds is None else time.monotonic() + seconds

    def check(self):
        if self.t_end is not None and time.monotonic() > self.t_end:
            raise BudgetExceeded("time budget exhausted")


def eliminate_exists_var(f: tuple, var: str, stats: QEStats, deadline: Deadline) -> tuple:
    """exists var . f  ->  quantifier-free equivalent."""
    for a in qf_atoms(f):
        if a.poly.degree_in(var) > 2:
            raise UnsupportedForm(f"degree of {var} exceeds 2")
    branches = []
    for guard, cand in _candidates(f, var):
        deadline.check()
        stats.case_count += 1
        sub = _substitute_candidate(f, var, cand)
        branches.append(qf_and([guard, sub]))
    stats.elimination_steps += 1
    out = qf_or(branches)
    if qf_size(out) > HARD_ATOM_CAP:
        raise BudgetExceeded(f"formula exceeded {HARD_ATOM_CAP} atoms")
    return out


def eliminate_prefix(qf: tuple, scalar_prefix: list[tuple[str, str]],
                     stats: QEStats, deadline: Deadline) -> tuple:
    """Eliminate (quantifier, scalar-variable) pairs, innermost last in the list."""
    i = len(scalar_prefix) - 1
    while i >= 0:
        q = scalar_prefix[i][0]
        j = i
        while j >= 0 and scalar_prefix[j][0] == q:
            j -= 1
        block = scalar_prefix[j + 1: i + 1]
        if q == F.FORALL:
            qf = qf_not(qf)
        for _, v in reversed(block):
            qf = eliminate_exists_var(qf, v, stats, deadline)
        if q == F.FORALL:
            qf = qf_not(qf)
        i = j
    return qf


def scalarize_prefix(prefix: Iterable[tuple[str, str]]) -> list[tuple[str, str]]:
    out = []
    for q, v in prefix:
        if F.is_scalar_var(v):
            out.append((q, v))
        else:
            out.append((q, f"{v}.x"))
            out.append((q, f"{v}.y"))
    return out


def eliminate(task: QETask, counters=None) -> QFSolution:
    """Symbolic quantifier elimination by virtual substitution.

    Raises UnsupportedForm for out-of-scope inputs and BudgetExceeded when
    the time budget or size caps are hit; the caller maps those to the
    numeric fallback or an unsolvable marker.
    """
    if counters is not None:
        counters.qe_invocations += 1
    stats = QEStats()
    deadline = Deadline(task.time_budget)
    matrix = task.problem.matrix
    qf, aux = lower_matrix(matrix)
    scalar_prefix = scalarize_prefix(task.problem.prefix)
    # sqrt auxiliaries join innermost as functionally determined existentials
    for name, side in aux:
        qf = qf_and([qf, side])
        scalar_prefix.append((F.EXISTS, name))
    qf = eliminate_prefix(qf, scalar_prefix, stats, deadline)
    stats.atom_count = qf_size(qf)
    if stats.atom_count > SOLUTION_CLAUSE_CAP:
        import warnings
        warnings.warn(
            f"stored solution has {stats.atom_count} atoms; reuse may not pay off",
            RuntimeWarning, stacklevel=2)
    return QFSolution(raise_qf(qf), "exact", stats)


# ---------------------------------------------------------------------------
# Raising internal formulas back to formula-core terms


def _monom_term(m, c: Fraction) -> F.Term:
    parts: list[F.Term] = []
    for v, e in m:
        base = F.Coord(v[:-2], v[-1]) if v.endswith(".x") or v.endswith(".y") else F.Sym(v)
        for _ in range(e):
            parts.append(base)
    out: F.Term = F.Const(abs(c))
    if parts:
        out = parts[0]
        for p in parts[1:]:
            out = F.mul(out, p)
        if abs(c) != 1:
            out = F.mul(F.Const(abs(c)), out)
    return out


def poly_to_term(p: Poly) -> tuple[F.Term, F.Term]:
    """Split into (positive part, negative part) terms for readable atoms."""
    pos: list[F.Term] = []
    neg: list[F.Term] = []
    for m in sorted(p.terms):
        c = p.terms[m]
        (pos if c > 0 else neg).append(_monom_term(m, c))
    def build(parts):
        if not parts:
            return F.Const(Fraction(0))
        return F.tsum(parts)
    return build(pos), build(neg)


def raise_qf(f: tuple) -> F.Formula:
    if f == QF_TRUE:
        return F.TRUE
    if f == QF_FALSE:
        return F.FALSE
    if f[0] == "A":
        lhs, rhs = poly_to_term(f[1].poly)
        return F.FAtom(F.Rel(f[1].rel, lhs, rhs))
    if f[0] == "&":
        return F.conj([raise_qf(c) for c in f[1]])
    if f[0] == "|":
        return F.disj([raise_qf(c) for c in f[1]])
    raise ValueError(f"bad qf node {f!r}")


# ---------------------------------------------------------------------------
# Ground decision with a geometric fast path


def decide(task: QETask, counters=None) -> bool:
    """Exact truth value of a sentence (no free variables)."""
    prb = task.problem
    fp, fs = prb.free()
    if fp or fs:
        raise UnsupportedForm(f"decide needs a sentence; free: {fp | fs}")
    fast = _decide_ground_geometric(prb)
    if fast is not None:
        return fast
    sol = eliminate(task, counters)
    return F.evaluate_ground(sol.formula, {})


def _decide_ground_geometric(prb: F.Prenex) -> Optional[bool]:
    """Single point-variable prefix over ground base predicates: decide by
    exact segment/triangle set operations instead of elimination."""
    if len(prb.prefix) != 1:
        return None
    q, var = prb.prefix[0]
    if F.is_scalar_var(var):
        return None
    try:
        dnf, negated = _ground_dnf(prb.matrix, var, negate=(q == F.FORALL))
    except _NotGroundBase:
        return None
    result_exists = any(_conjunct_feasible(conj, var) for conj in dnf)
    return (not result_exists) if negated else result_exists


class _NotGroundBase(Exception):
    pass


def _ground_dnf(matrix: F.Formula, var: str, negate: bool):
    lits: list = []

    def to_nnf(f: F.Formula, pol: bool):
        if isinstance(f, F.FAtom):
            a = f.atom
            if isinstance(a, F.Rel):
                pts, scs = F.atom_vars(a)
                if pts or scs:
                    raise _NotGroundBase()
                val = F.evaluate_ground(F.FAtom(a), {})
                return [[True]] if (val == pol) else [[False]]
            if a.name not in ("On", "Inside"):
                raise _NotGroundBase()
            pts, scs = F.atom_vars(a)
            if scs or pts - {var}:
                raise _NotGroundBase()
            if not pts:
                val = F.evaluate_ground(F.FAtom(a), {})
                return [[val == pol and True or False]] if True else None
            return [[(a, pol)]]
        if isinstance(f, F.FNot):
            return to_nnf(f.body, not pol)
        if isinstance(f, (F.FAnd, F.FOr)):
            is_and = isinstance(f, F.FAnd) == pol
            parts = [to_nnf(c, pol) for c in f.children]
            if is_and:
                out = [[]]
                for p in parts:
                    out = [x + y for x in out for y in p]
                    if len(out) > 256:
                        raise _NotGroundBase()
                return out
            out = []
            for p in parts:
                out.extend(p)
            return out
        raise _NotGroundBase()

    dnf = to_nnf(matrix, not negate if False else True) if not negate else to_nnf(matrix, False)
    return dnf, negate


def _conjunct_feasible(literals: list, var: str) -> bool:
    pos_on: list[tuple] = []
    pos_in: list[F.TriArg] = []
    neg_on: list[tuple] = []
    neg_in: list[F.TriArg] = []
    for lit in literals:
        if lit is True:
            continue
        if lit is False:
            return False
        a, pol = lit
        if a.name == "On":
            target = a.args[1]
            segs = ([ (target.a, target.b) ] if isinstance(target, F.SegArg)
                    else list(zip(target.vertices, target.vertices[1:])))
            # curve-level literal: on any of its segments
            if pol:
                pos_on.append(segs)
            else:
                neg_on.extend(segs)
        else:
            target = a.args[1]
            tris = ([target] if isinstance(target, F.TriArg) else list(target.triangles))
            if pol:
                pos_in.append(tris)
            else:
                neg_in.extend(tris)

    def p2(x) -> G.Point:
        return (x.x, x.y)

    # positive On over a curve means a disjunction over its segments
    if pos_on:
        for combo in itertools.product(*pos_on):
            first, rest = combo[0], combo[1:]
            if _segment_case_feasible(first, rest, pos_in, neg_on, neg_in):
                return True
        return False
    if pos_in:
        for combo in itertools.product(*pos_in):
            if _triangle_case_feasible(combo, neg_on, neg_in):
                return True
        return False
    # all literals negative: complement of finitely many closed sets
    return True


def _segment_case_feasible(seg, other_segs, pos_in, neg_on, neg_in) -> bool:
    a = (seg[0].x, seg[0].y)
    b = (seg[1].x, seg[1].y)
    intervals: list[tuple[Fraction, Fraction, bool, bool]] = [(Fraction(0), Fraction(1), True, True)]

    def clip_to(lo, hi, lo_closed=True, hi_closed=True):
        nonlocal intervals
        out = []
        for (l, h, lc, hc) in intervals:
            nl, nh = max(l, lo), min(h, hi)
            if nl > nh:
                continue
            nlc = (lc if nl == l else lo_closed) and not (nl == l == lo and not (lc and lo_closed))
            nlc = (lc and (nl != lo or lo_closed)) if nl == l == lo else (lc if nl == l else lo_closed)
            nhc = (hc and (nh != hi or hi_closed)) if nh == h == hi else (hc if nh == h else hi_closed)
            if nl == nh and not (nlc and nhc):
                continue
            out.append((nl, nh, nlc, nhc))
        intervals = out

    def subtract(lo, hi):
        nonlocal intervals
        out = []
        for (l, h, lc, hc) in intervals:
            if hi < l or lo > h:
                out.append((l, h, lc, hc))
                continue
            if lo > l or (lo == l and lc):
                nh, nhc = (lo, False) if lo <= h else (h, hc)
                if l < nh or (l == nh and lc and nhc):
                    out.append((l, nh, lc, nhc))
            if hi < h or (hi == h and hc):
                nl, nlc = (hi, False) if hi >= l else (l, lc)
                if nl < h or (nl == h and nlc and hc):
                    out.append((nl, h, nlc, hc))
        intervals = out

    def seg_param_range(c, d) -> Optional[tuple[Fraction, Fraction]]:
        """Params of [a,b] lying on closed segment [c,d] (collinear overlap),
        or the single crossing parameter."""
        c1 = G.cross(c, d, a)
        c2 = G.cross(c, d, b)
        if c1 == 0 and c2 == 0:
            # collinear: project c,d on a->b
            d2 = G.dist_sq(a, b)
            t1 = ((c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1])) / d2
            t2 = ((d[0] - a[0]) * (b[0] - a[0]) + (d[1] - a[1]) * (b[1] - a[1])) / d2
            lo, hi = min(t1, t2), max(t1, t2)
            return max(lo, Fraction(0)), min(hi, Fraction(1))
        if c1 == c2:
            return None
        t = c1 / (c1 - c2)
        if t < 0 or t > 1:
            return None
        # intersection point must lie within [c,d]
        px = a[0] + t * (b[0] - a[0])
        py = a[1] + t * (b[1] - a[1])
        if G.point_on_segment((px, py), c, d):
            return (t, t)
        return None

    for (u, v) in other_segs:
        r = seg_param_range((u.x, u.y), (v.x, v.y))
        if r is None or r[0] > r[1]:
            return False
        clip_to(r[0], r[1])
        if not intervals:
            return False
    for tris in pos_in:
        # disjunction over region triangles: union of clipped intervals
        union_parts = []
        for tri in tris:
            saved = list(intervals)
            _clip_interval_triangle(intervals := saved and None, None, None)  # placeholder
        # simpler: feasibility per triangle separately
        ok_union = []
        for tri in tris:
            tmp = list(intervals)
            tmp2 = _clip_intervals_to_triangle(tmp, a, b, tri)
            ok_union.extend(tmp2)
        intervals = _merge_intervals(ok_union)
        if not intervals:
            return False
    for (u, v) in neg_on:
        r = seg_param_range((u.x, u.y), (v.x, v.y))
        if r is not None and r[0] <= r[1]:
            subtract(r[0], r[1])
        if not intervals:
            return False
    for tri in neg_in:
        rng = _triangle_param_range(a, b, tri)
        if rng is not None:
            subtract(rng[0], rng[1])
        if not intervals:
            return False
    return bool(intervals)


def _clip_intervals_to_triangle(intervals, a, b, tri):
    rng = _triangle_param_range(a, b, tri)
    if rng is None:
        return []
    lo, hi = rng
    out = []
    for (l, h, lc, hc) in intervals:
        nl, nh = max(l, lo), min(h, hi)
        if nl > nh:
            continue
        nlc = lc if nl == l else True
        nhc = hc if nh == h else True
        if nl == nh and not (nlc and nhc):
            continue
        out.append((nl, nh, nlc, nhc))
    return out


def _merge_intervals(intervals):
    return sorted(set(intervals))


def _clip_interval_triangle(*args):
    return None


def _triangle_param_range(a, b, tri: F.TriArg) -> Optional[tuple[Fraction, Fraction]]:
    """Parameter range of segment a->b inside a closed CCW triangle."""
    pts = [(x.x, x.y) for x in (tri.a, tri.b, tri.c)]
    if G.signed_area3(*pts) < 0:
        pts = [pts[0], pts[2], pts[1]]
    lo, hi = Fraction(0), Fraction(1)
    for u, v in ((0, 1), (1, 2), (2, 0)):
        p, q = pts[u], pts[v]
        # halfplane cross(p,q,x) >= 0; along the segment it is linear in t
        f0 = G.cross(p, q, a)
        f1 = G.cross(p, q, b)
        dfdt = f1 - f0
        if dfdt == 0:
            if f0 < 0:
                return None
            continue
        t_star = -f0 / dfdt
        if dfdt > 0:
            lo = max(lo, t_star)
        else:
            hi = min(hi, t_star)
        if lo > hi:
            return None
    return lo, hi


def _triangle_case_feasible(tris, neg_on, neg_in) -> bool:
    poly = [(t.x, t.y) for t in (tris[0].a, tris[0].b, tris[0].c)]
    if G.signed_area3(*poly) < 0:
        poly = [poly[0], poly[2], poly[1]]
    for tri in tris[1:]:
        clip = [(t.x, t.y) for t in (tri.a, tri.b, tri.c)]
        if G.signed_area3(*clip) < 0:
            clip = [clip[0], clip[2], clip[1]]
        poly = _convex_clip(poly, clip)
        if not poly:
            return False
    if neg_on:
        return None is not None  # conservative: let the caller fall back
    if len(neg_in) == 0:
        return bool(poly)
    if len(neg_in) == 1:
        tri = neg_in[0]
        pts = [(x.x, x.y) for x in (tri.a, tri.b, tri.c)]
        t = G.triangle_ccw(*pts)
        return any(not G.point_in_triangle(v, t, closed=True) for v in poly)
    return None is not None


def _convex_clip(subject: list, clip: list) -> list:
    out = subject
    n = len(clip)
    for i in range(n):
        p, q = clip[i], clip[(i + 1) % n]
        if not out:
            return []
        res = []
        m = len(out)
        for j in range(m):
            cur, nxt = out[j], out[(j + 1) % m]
            c_in = G.cross(p, q, cur) >= 0
            n_in = G.cross(p, q, nxt) >= 0
            if c_in:
                res.append(cur)
            if c_in != n_in:
                f0 = G.cross(p, q, cur)
                f1 = G.cross(p, q, nxt)
                t = f0 / (f0 - f1)
                res.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
        # dedupe consecutive duplicates
        ded = []
        for v in res:
            if not ded or ded[-1] != v:
                ded.append(v)
        if len(ded) > 1 and ded[0] == ded[-1]:
            ded.pop()
        out = ded
    return out


# ---------------------------------------------------------------------------
# Sampling oracle (approximate; tests and fallback only)


@dataclass
class SampleBox:
    xlo: Fraction
    xhi: Fraction
    ylo: Fraction
    yhi: Fraction


def sample_oracle(problem: F.Prenex, box: SampleBox, trials: int = 64,
                  grid: int = 8, seed: int = 0,
                  assignment: dict | None = None) -> bool:
    """Approximate decision by grid-plus-random sampling of quantified points.

    A forall is falsified by any counterexample sample; an exists is
    verified by any witness.  Exact evaluation at each sample.
    """
    rng = random.Random(seed)
    env = dict(assignment or {})

    def points() -> list:
        pts = []
        for i in range(grid):
            for j in range(grid):
                x = box.xlo + (box.xhi - box.xlo) * Fraction(2 * i + 1, 2 * grid)
                y = box.ylo + (box.yhi - box.ylo) * Fraction(2 * j + 1, 2 * grid)
                pts.append((x, y))
        for _ in range(trials):
            x = box.xlo + (box.xhi - box.xlo) * Fraction(rng.randint(0, 10_000), 10_000)
            y = box.ylo + (box.yhi - box.ylo) * Fraction(rng.randint(0, 10_000), 10_000)
            pts.append((x, y))
        return pts

    def scalars() -> list:
        vals = []
        for i in range(grid * grid):
            vals.append(Fraction(2 * i + 1, 2 * grid * grid))
        for _ in range(trials):
            vals.append(Fraction(rng.randint(0, 10_000), 10_000))
        return vals

    def go(idx: int) -> bool:
        if idx == len(problem.prefix):
            return F.evaluate_ground(problem.matrix, env)
        q, v = problem.prefix[idx]
        samples = scalars() if F.is_scalar_var(v) else points()
        if q == F.EXISTS:
            for s in samples:
                env[v] = s
                if go(idx + 1):
                    del env[v]
                    return True
            env.pop(v, None)
            return False
        for s in samples:
            env[v] = s
            if not go(idx + 1):
                del env[v]
                return False
        env.pop(v, None)
        return True

    return go(0)


# ---------------------------------------------------------------------------
# Optimization


@dataclass
class OptResult:
    value: object  # Radical for exact, float for approximate
    attained: bool
    exact: bool
    conditions: F.Formula
    status: str = "ok"  # ok | unbounded | infeasible


def optimize(objective: F.Term, variables: list[str], constraint: F.Formula,
             sense: str, budget: float = 5.0, seed: int = 0,
             counters=None) -> OptResult:
    """Maximize/minimize an objective over point variables under a constraint.

    Symbolic route: eliminate exists(vars)(C and objective = z), then read
    the supremum/infimum of the satisfied z-set from the atom roots.  Falls
    back to seeded multi-start local search (approximate) when the symbolic
    route is out of scope.
    """
    assert sense in ("max", "min")
    z = "$obj"
    eqn = F.FAtom(F.Rel("=", objective, F.Sym(z)))
    body = F.conj([constraint, eqn])
    prefix = tuple((F.EXISTS, v) for v in variables)
    prb = F.Prenex(prefix, body)
    try:
        sol = eliminate(QETask(F.Prenex(prb.prefix, prb.matrix), time_budget=budget), counters)
        qf, aux = lower_matrix(sol.formula)
        if aux:
            raise UnsupportedForm("residual radicals in objective set")
        return _one_var_extremum(qf, z, sense, sol.formula)
    except (UnsupportedForm, DegreeTooHigh, BudgetExceeded):
        return _numeric_optimize(objective, variables, constraint, sense, budget, seed)


def _one_var_extremum(qf, z: str, sense: str, conds: F.Formula) -> OptResult:
    candidates: list[Radical] = []
    for a in qf_atoms(qf):
        if a.poly.degree_in(z) == 0:
            continue
        coeffs = a.poly.coeffs_in(z)
        consts = [c.as_const() for c in coeffs]
        if any(c is None for c in consts):
            raise UnsupportedForm("objective set depends on extra free variables")
        if len(consts) == 2:
            candidates.append(Radical.from_rat(-consts[0] / consts[1]))
        else:
            c0, c1, c2 = consts
            if c2 == 0:
                if c1 != 0:
                    candidates.append(Radical.from_rat(-c0 / c1))
                continue
            disc = c1 * c1 - 4 * c2 * c0
            if disc < 0:
                continue
            root = Radical.sqrt_of_rat(disc)
            for s in (1, -1):
                val = (Radical.from_rat(-c1) + root.scale_signed(s)) / Radical.from_rat(2 * c2) \
                    if hasattr(root, "scale_signed") else None
                # scale_signed helper absent: compute directly
                num = Radical.from_rat(-c1) + (root if s > 0 else -root)
                candidates.append(num / Radical.from_rat(2 * c2))
    candidates = sorted(set(candidates))

    def holds_at(v: Radical) -> bool:
        return _qf_eval_radical(qf, z, v)

    if not candidates:
        empty = not holds_at(Radical.from_rat(0))
        if empty:
            return OptResult(None, False, True, F.FALSE, status="infeasible")
        return OptResult(None, False, True, conds, status="unbounded")
    lo_probe = candidates[0] - Radical.from_rat(1)
    hi_probe = candidates[-1] + Radical.from_rat(1)
    feasible_any = any(holds_at(c) for c in candidates) or holds_at(lo_probe) or holds_at(hi_probe)
    probes = []
    if not feasible_any:
        between = [(candidates[i] + candidates[i + 1]) / Radical.from_rat(2)
                   for i in range(len(candidates) - 1)]
        feasible_any = any(holds_at(b) for b in between)
        probes = between
    if not feasible_any:
        return OptResult(None, False, True, F.FALSE, status="infeasible")
    if sense == "max":
        if holds_at(hi_probe):
            return OptResult(None, False, True, conds, status="unbounded")
        for c in reversed(candidates):
            if holds_at(c):
                return OptResult(c, True, True, conds)
        # supremum not attained at a root: open interval topped by some root
        return OptResult(None, False, True, conds, status="unbounded")
    if holds_at(lo_probe):
        return OptResult(None, False, True, conds, status="unbounded")
    for c in candidates:
        if holds_at(c):
            return OptResult(c, True, True, conds)
    return OptResult(None, False, True, conds, status="unbounded")


def _qf_eval_radical(f, var: str, val: Radical) -> bool:
    if f == QF_TRUE:
        return True
    if f == QF_FALSE:
        return False
    if f[0] == "A":
        total = Radical()
        for m, c in f[1].poly.terms.items():
            part = Radical.from_rat(c)
            for v, e in m:
                if v == var:
                    for _ in range(e):
                        part = part * val
                else:
                    raise UnsupportedForm("extra variable in objective set")
            total = total + part
        s = total.sign()
        return {"<": s < 0, "<=": s <= 0, "=": s == 0, "!=": s != 0}[f[1].rel]
    if f[0] == "&":
        return all(_qf_eval_radical(c, var, val) for c in f[1])
    if f[0] == "|":
        return any(_qf_eval_radical(c, var, val) for c in f[1])
    raise ValueError(f)


def _numeric_optimize(objective, variables, constraint, sense, budget, seed) -> OptResult:
    import math

    rng = random.Random(seed)
    pts, scalars = F.free_vars(constraint)

    def as_env(x: list[float]) -> dict:
        env = {}
        for i, v in enumerate(variables):
            env[v] = (Fraction(x[2 * i]).limit_denominator(10**6),
                      Fraction(x[2 * i + 1]).limit_denominator(10**6))
        return env

    def feasible(x) -> bool:
        try:
            return F.evaluate_ground(constraint, as_env(x))
        except F.EvaluationError:
            return False

    def value(x) -> float:
        env = as_env(x)
        return float(F.eval_term(objective, env))

    best: Optional[tuple[float, list[float]]] = None
    t_end = time.monotonic() + budget
    span = 40.0
    n = 2 * len(variables)
    starts = [[rng.uniform(-span, span) for _ in range(n)] for _ in range(24)]
    for x in starts:
        if time.monotonic() > t_end:
            break
        if not feasible(x):
            continue
        cur = x[:]
        curval = value(cur)
        step = 4.0
        while step > 1e-6 and time.monotonic() < t_end:
            improved = False
            for i in range(n):
                for d in (step, -step):
                    trial = cur[:]
                    trial[i] += d
                    if not feasible(trial):
                        continue
                    tv = value(trial)
                    if (sense == "min" and tv < curval - 1e-12) or \
                       (sense == "max" and tv > curval + 1e-12):
                        cur, curval = trial, tv
                        improved = True
            if not improved:
                step /= 2
        if best is None or (sense == "min" and curval < best[0]) or \
           (sense == "max" and curval > best[0]):
            best = (curval, cur)
    if best is None:
        return OptResult(None, False, False, F.FALSE, status="infeasible")
    return OptResult(best[0], True, False, constraint)

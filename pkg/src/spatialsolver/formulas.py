"""First-order spatial formulas: terms, atoms, prenex form, canonical parse
trees, structural signatures, similarity and solution transfer.

Variables are points (pairs of reals) or scalars.  Only point variables may
be quantified; scalar symbols occur free (they typically stand for abstracted
numeric constants).  Matrices of decomposed subproblems contain only
relational atoms and the base predicates On(point, segment) and
Inside(point, triangle).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional

from .exactmath import Radical, Rat, to_rat

EXISTS = "E"
FORALL = "A"

# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Const(Term):
    value: Fraction


@dataclass(frozen=True)
class Sym(Term):
    """Free scalar variable reference."""

    name: str


@dataclass(frozen=True)
class Coord(Term):
    """Coordinate of a point variable, e.g. p.x."""

    point: str
    axis: str  # 'x' or 'y'


@dataclass(frozen=True)
class BinOp(Term):
    op: str  # '+', '-', '*', '/'
    left: Term
    right: Term


@dataclass(frozen=True)
class SqrtT(Term):
    arg: Term


def const(v) -> Const:
    return Const(to_rat(v))


def add(a: Term, b: Term) -> Term:
    return BinOp("+", a, b)


def sub(a: Term, b: Term) -> Term:
    return BinOp("-", a, b)


def mul(a: Term, b: Term) -> Term:
    return BinOp("*", a, b)


def div(a: Term, b: Term) -> Term:
    return BinOp("/", a, b)


def tsum(items: list[Term]) -> Term:
    out = items[0]
    for it in items[1:]:
        out = add(out, it)
    return out


class EvaluationError(Exception):
    pass


def eval_term(t: Term, env: dict) -> Radical:
    """Exact evaluation; env maps point names to (Rat, Rat) and scalar names to Rat."""
    if isinstance(t, Const):
        return Radical.from_rat(t.value)
    if isinstance(t, Sym):
        if t.name not in env:
            raise EvaluationError(f"unbound scalar {t.name}")
        v = env[t.name]
        return v if isinstance(v, Radical) else Radical.from_rat(v)
    if isinstance(t, Coord):
        if t.point not in env:
            raise EvaluationError(f"unbound point {t.point}")
        x, y = env[t.point]
        return Radical.from_rat(x if t.axis == "x" else y)
    if isinstance(t, BinOp):
        a = eval_term(t.left, env)
        b = eval_term(t.right, env)
        if t.op == "+":
            return a + b
        if t.op == "-":
            return a - b
        if t.op == "*":
            return a * b
        if t.op == "/":
            if b.sign() == 0:
                raise EvaluationError(f"division by zero in {term_str(t)}")
            return a / b
        raise EvaluationError(f"unknown operator {t.op}")
    if isinstance(t, SqrtT):
        v = eval_term(t.arg, env)
        if v.sign() < 0:
            raise EvaluationError(f"square root of negative value in {term_str(t)}")
        return v.sqrt()
    raise EvaluationError(f"unknown term {t!r}")


def term_vars(t: Term, points: set[str], scalars: set[str]) -> None:
    if isinstance(t, Sym):
        scalars.add(t.name)
    elif isinstance(t, Coord):
        points.add(t.point)
    elif isinstance(t, BinOp):
        term_vars(t.left, points, scalars)
        term_vars(t.right, points, scalars)
    elif isinstance(t, SqrtT):
        term_vars(t.arg, points, scalars)


# ---------------------------------------------------------------------------
# Predicate arguments: points, segments, triangles, whole curves/regions.
# Composite objects keep their vertex tuples inline so decomposition needs no
# external environment.


@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PLit:
    x: Fraction
    y: Fraction


PointArg = PVar | PLit


@dataclass(frozen=True)
class SegArg:
    a: PointArg
    b: PointArg


@dataclass(frozen=True)
class TriArg:
    a: PointArg
    b: PointArg
    c: PointArg


@dataclass(frozen=True)
class CurveArg:
    """Piecewise-linear curve as an inline vertex sequence."""

    vertices: tuple[PointArg, ...]


@dataclass(frozen=True)
class RegionArg:
    """Region by boundary vertices plus its triangulation (CCW triples)."""

    boundary: tuple[PointArg, ...]
    triangles: tuple[TriArg, ...]


def plit(x, y) -> PLit:
    return PLit(to_rat(x), to_rat(y))


# ---------------------------------------------------------------------------
# Atoms and formulas


@dataclass(frozen=True)
class Atom:
    pass


@dataclass(frozen=True)
class Rel(Atom):
    """lhs op rhs with op in <, <=, =, !=, >=, >.

    <= and >= are surface syntax; desugar_core rewrites them before
    canonicalization so stored matrices use only the core operator set.
    """

    op: str
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Pred(Atom):
    name: str
    args: tuple


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class FAtom(Formula):
    atom: Atom


@dataclass(frozen=True)
class FNot(Formula):
    body: Formula


@dataclass(frozen=True)
class FAnd(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class FOr(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class FQuant(Formula):
    quant: str  # EXISTS or FORALL
    var: str  # point variable name
    body: Formula


TRUE = FAtom(Rel("=", Const(Fraction(0)), Const(Fraction(0))))
FALSE = FAtom(Rel("!=", Const(Fraction(0)), Const(Fraction(0))))


def is_true(f: Formula) -> bool:
    return f == TRUE


def is_false(f: Formula) -> bool:
    return f == FALSE


def conj(items: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for it in items:
        if is_true(it):
            continue
        if is_false(it):
            return FALSE
        if isinstance(it, FAnd):
            out.extend(it.children)
        else:
            out.append(it)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return FAnd(tuple(out))


def disj(items: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for it in items:
        if is_false(it):
            continue
        if is_true(it):
            return TRUE
        if isinstance(it, FOr):
            out.extend(it.children)
        else:
            out.append(it)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return FOr(tuple(out))


def neg(f: Formula) -> Formula:
    if is_true(f):
        return FALSE
    if is_false(f):
        return TRUE
    if isinstance(f, FNot):
        return f.body
    return FNot(f)


def exists(var: str, body: Formula) -> Formula:
    return FQuant(EXISTS, var, body)


def forall(var: str, body: Formula) -> Formula:
    return FQuant(FORALL, var, body)


def implies(a: Formula, b: Formula) -> Formula:
    return disj([neg(a), b])


class MalformedFormula(Exception):
    pass


# ---------------------------------------------------------------------------
# Variable discovery and substitution


def _arg_points(arg, out: set[str]) -> None:
    if isinstance(arg, PVar):
        out.add(arg.name)
    elif isinstance(arg, SegArg):
        _arg_points(arg.a, out)
        _arg_points(arg.b, out)
    elif isinstance(arg, TriArg):
        for p in (arg.a, arg.b, arg.c):
            _arg_points(p, out)
    elif isinstance(arg, CurveArg):
        for p in arg.vertices:
            _arg_points(p, out)
    elif isinstance(arg, RegionArg):
        for p in arg.boundary:
            _arg_points(p, out)
        for t in arg.triangles:
            _arg_points(t, out)


def atom_vars(a: Atom) -> tuple[set[str], set[str]]:
    points: set[str] = set()
    scalars: set[str] = set()
    if isinstance(a, Rel):
        term_vars(a.lhs, points, scalars)
        term_vars(a.rhs, points, scalars)
    else:
        for arg in a.args:
            if isinstance(arg, Term):
                term_vars(arg, points, scalars)
            else:
                _arg_points(arg, points)
    return points, scalars


def is_scalar_var(name: str) -> bool:
    """Scalar-quantified parameters carry a $ prefix (the definitional t of On)."""
    return name.startswith("$")


def free_vars(f: Formula, bound: frozenset[str] = frozenset()) -> tuple[set[str], set[str]]:
    """Free (point, scalar) variables of a formula."""
    if isinstance(f, FAtom):
        pts, scs = atom_vars(f.atom)
        return pts - bound, scs - bound
    if isinstance(f, FNot):
        return free_vars(f.body, bound)
    if isinstance(f, (FAnd, FOr)):
        pts: set[str] = set()
        scs: set[str] = set()
        for c in f.children:
            p, s = free_vars(c, bound)
            pts |= p
            scs |= s
        return pts, scs
    if isinstance(f, FQuant):
        return free_vars(f.body, bound | {f.var})
    raise MalformedFormula(f"unknown formula node {f!r}")


def _subst_parg(arg, pmap: dict[str, PointArg]):
    if isinstance(arg, PVar):
        return pmap.get(arg.name, arg)
    if isinstance(arg, SegArg):
        return SegArg(_subst_parg(arg.a, pmap), _subst_parg(arg.b, pmap))
    if isinstance(arg, TriArg):
        return TriArg(*(_subst_parg(p, pmap) for p in (arg.a, arg.b, arg.c)))
    if isinstance(arg, CurveArg):
        return CurveArg(tuple(_subst_parg(p, pmap) for p in arg.vertices))
    if isinstance(arg, RegionArg):
        return RegionArg(
            tuple(_subst_parg(p, pmap) for p in arg.boundary),
            tuple(_subst_parg(t, pmap) for t in arg.triangles),
        )
    return arg


def _subst_term(t: Term, pmap: dict[str, PointArg], smap: dict[str, Term]) -> Term:
    if isinstance(t, Sym):
        return smap.get(t.name, t)
    if isinstance(t, Coord):
        rep = pmap.get(t.point)
        if rep is None:
            return t
        if isinstance(rep, PVar):
            return Coord(rep.name, t.axis)
        return Const(rep.x if t.axis == "x" else rep.y)
    if isinstance(t, BinOp):
        return BinOp(t.op, _subst_term(t.left, pmap, smap), _subst_term(t.right, pmap, smap))
    if isinstance(t, SqrtT):
        return SqrtT(_subst_term(t.arg, pmap, smap))
    return t


def substitute(f: Formula, pmap: dict[str, PointArg] | None = None,
               smap: dict[str, Term] | None = None) -> Formula:
    """Capture-naive substitution of point/scalar variables (callers rename apart)."""
    pmap = pmap or {}
    smap = smap or {}
    if isinstance(f, FAtom):
        a = f.atom
        if isinstance(a, Rel):
            return FAtom(Rel(a.op, _subst_term(a.lhs, pmap, smap), _subst_term(a.rhs, pmap, smap)))
        new_args = tuple(
            _subst_term(arg, pmap, smap) if isinstance(arg, Term) else _subst_parg(arg, pmap)
            for arg in a.args
        )
        return FAtom(Pred(a.name, new_args))
    if isinstance(f, FNot):
        return FNot(substitute(f.body, pmap, smap))
    if isinstance(f, FAnd):
        return FAnd(tuple(substitute(c, pmap, smap) for c in f.children))
    if isinstance(f, FOr):
        return FOr(tuple(substitute(c, pmap, smap) for c in f.children))
    if isinstance(f, FQuant):
        inner_pmap = {k: v for k, v in pmap.items() if k != f.var}
        inner_smap = {k: v for k, v in smap.items() if k != f.var}
        return FQuant(f.quant, f.var, substitute(f.body, inner_pmap, inner_smap))
    raise MalformedFormula(f"unknown formula node {f!r}")


# ---------------------------------------------------------------------------
# Prenex form


@dataclass(frozen=True)
class Prenex:
    """Quantifier prefix plus quantifier-free matrix.

    The prefix holds (quantifier, point variable) pairs outermost first,
    contains no duplicate variables and no variables absent from the matrix.
    """

    prefix: tuple[tuple[str, str], ...]
    matrix: Formula

    @property
    def blocks(self) -> list[tuple[str, list[str]]]:
        out: list[tuple[str, list[str]]] = []
        for q, v in self.prefix:
            if out and out[-1][0] == q:
                out[-1][1].append(v)
            else:
                out.append((q, [v]))
        return out

    def free(self) -> tuple[set[str], set[str]]:
        pts, scs = free_vars(self.matrix)
        return pts - {v for _, v in self.prefix}, scs


_fresh_counter = [0]


def _fresh(base: str) -> str:
    _fresh_counter[0] += 1
    return f"{base}_{_fresh_counter[0]}"


def rename_apart(f: Formula, taken: set[str] | None = None) -> Formula:
    """Rename bound variables so no variable is bound twice or shadows a free one."""
    taken = set(taken or set())
    pts, _ = free_vars(f)
    taken |= pts

    def walk(g: Formula, ren: dict[str, str]) -> Formula:
        if isinstance(g, FAtom):
            pmap = {old: PVar(new) for old, new in ren.items() if not is_scalar_var(old)}
            smap = {old: Sym(new) for old, new in ren.items() if is_scalar_var(old)}
            return substitute(g, pmap, smap)
        if isinstance(g, FNot):
            return FNot(walk(g.body, ren))
        if isinstance(g, FAnd):
            return FAnd(tuple(walk(c, ren) for c in g.children))
        if isinstance(g, FOr):
            return FOr(tuple(walk(c, ren) for c in g.children))
        if isinstance(g, FQuant):
            name = g.var
            if name in taken:
                name = _fresh(g.var.split("_")[0] or "v")
                while name in taken:
                    name = _fresh(g.var.split("_")[0] or "v")
            taken.add(name)
            inner = dict(ren)
            inner[g.var] = name
            return FQuant(g.quant, name, walk(g.body, inner))
        raise MalformedFormula(f"unknown formula node {g!r}")

    return walk(f, {})


def to_prenex(f: Formula) -> Prenex:
    """Pull quantifiers to a prefix; logically equivalent to the input.

    Bound variables are renamed apart first.  Redundant prefix variables
    (absent from the matrix) are dropped.
    """
    f = rename_apart(f)

    def pull(g: Formula) -> tuple[list[tuple[str, str]], Formula]:
        if isinstance(g, FAtom):
            return [], g
        if isinstance(g, FNot):
            pre, m = pull(g.body)
            flipped = [(FORALL if q == EXISTS else EXISTS, v) for q, v in pre]
            return flipped, neg(m)
        if isinstance(g, (FAnd, FOr)):
            pres: list[tuple[str, str]] = []
            mats = []
            for c in g.children:
                p, m = pull(c)
                pres.extend(p)
                mats.append(m)
            merged = conj(mats) if isinstance(g, FAnd) else disj(mats)
            return pres, merged
        if isinstance(g, FQuant):
            pre, m = pull(g.body)
            return [(g.quant, g.var)] + pre, m
        raise MalformedFormula(f"unknown formula node {g!r}")

    prefix, matrix = pull(f)
    used, _ = free_vars(matrix)
    prefix = [(q, v) for q, v in prefix if v in used]
    return Prenex(tuple(prefix), matrix)


def desugar_core(f: Formula) -> Formula:
    """Rewrite <= and >= atoms into negated strict comparisons (core operators)."""
    if isinstance(f, FAtom):
        a = f.atom
        if isinstance(a, Rel):
            if a.op == "<=":
                return neg(FAtom(Rel(">", a.lhs, a.rhs)))
            if a.op == ">=":
                return neg(FAtom(Rel("<", a.lhs, a.rhs)))
        return f
    if isinstance(f, FNot):
        return neg(desugar_core(f.body))
    if isinstance(f, FAnd):
        return conj([desugar_core(c) for c in f.children])
    if isinstance(f, FOr):
        return disj([desugar_core(c) for c in f.children])
    if isinstance(f, FQuant):
        return FQuant(f.quant, f.var, desugar_core(f.body))
    raise MalformedFormula(f"unknown formula node {f!r}")


# ---------------------------------------------------------------------------
# Canonicalization.  Children of and/or nodes are sorted by a structural key
# that abstracts variable names (bound variables to their block index, free
# variables to a single marker) and numeric literal values, so the order is
# stable across the per-slot constant differences a decomposition produces.
# Predicate argument order is never changed.


def _term_key(t: Term, roles: dict[str, tuple]) -> tuple:
    if isinstance(t, Const):
        return ("lit",)
    if isinstance(t, Sym):
        return ("sym",)
    if isinstance(t, Coord):
        return ("coord", roles.get(t.point, ("f",)), t.axis)
    if isinstance(t, BinOp):
        return ("op", t.op, _term_key(t.left, roles), _term_key(t.right, roles))
    if isinstance(t, SqrtT):
        return ("sqrt", _term_key(t.arg, roles))
    return ("?",)


def _parg_key(arg, roles: dict[str, tuple]) -> tuple:
    if isinstance(arg, PVar):
        return ("pv", roles.get(arg.name, ("f",)))
    if isinstance(arg, PLit):
        return ("plit",)
    if isinstance(arg, SegArg):
        return ("seg", _parg_key(arg.a, roles), _parg_key(arg.b, roles))
    if isinstance(arg, TriArg):
        return ("tri",) + tuple(_parg_key(p, roles) for p in (arg.a, arg.b, arg.c))
    if isinstance(arg, CurveArg):
        return ("curve", len(arg.vertices)) + tuple(_parg_key(p, roles) for p in arg.vertices)
    if isinstance(arg, RegionArg):
        return ("region", len(arg.boundary), len(arg.triangles))
    if isinstance(arg, Term):
        return ("t", _term_key(arg, roles))
    return ("?",)


def _node_key(f: Formula, roles: dict[str, tuple]) -> tuple:
    if isinstance(f, FAtom):
        a = f.atom
        if isinstance(a, Rel):
            return ("rel", a.op, _term_key(a.lhs, roles), _term_key(a.rhs, roles))
        return ("pred", a.name, len(a.args)) + tuple(_parg_key(x, roles) for x in a.args)
    if isinstance(f, FNot):
        return ("not", _node_key(f.body, roles))
    if isinstance(f, FAnd):
        return ("and", len(f.children), tuple(sorted(_node_key(c, roles) for c in f.children)))
    if isinstance(f, FOr):
        return ("or", len(f.children), tuple(sorted(_node_key(c, roles) for c in f.children)))
    if isinstance(f, FQuant):
        return ("quant", f.quant, _node_key(f.body, roles))
    raise MalformedFormula(f"unknown formula node {f!r}")


def _block_roles(prefix: tuple[tuple[str, str], ...]) -> dict[str, tuple]:
    roles: dict[str, tuple] = {}
    block = -1
    last_q = None
    for q, v in prefix:
        if q != last_q:
            block += 1
            last_q = q
        roles[v] = ("b", block)
    return roles


def canonicalize(matrix: Formula, prefix: tuple[tuple[str, str], ...] = ()) -> Formula:
    """Deterministically sort and/or children by structural key (stable)."""
    roles = _block_roles(prefix)

    def walk(g: Formula) -> Formula:
        if isinstance(g, FAtom):
            return g
        if isinstance(g, FNot):
            return FNot(walk(g.body))
        if isinstance(g, (FAnd, FOr)):
            kids = [walk(c) for c in g.children]
            kids.sort(key=lambda c: _node_key(c, roles))
            return FAnd(tuple(kids)) if isinstance(g, FAnd) else FOr(tuple(kids))
        raise MalformedFormula("matrix must be quantifier-free")

    return walk(matrix)


def canonical_problem(p: Prenex) -> Prenex:
    return Prenex(p.prefix, canonicalize(desugar_core(p.matrix), p.prefix))


# ---------------------------------------------------------------------------
# Signature (the theta tuple)

_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]


def _prime(i: int) -> int:
    while len(_PRIMES) <= i:
        n = _PRIMES[-1] + 2
        while any(n % p == 0 for p in _PRIMES if p * p <= n):
            n += 2
        _PRIMES.append(n)
    return _PRIMES[i]


def xi(seq: Iterable[int]) -> int:
    """Pack an integer sequence into a unique product of prime powers."""
    out = 1
    for i, v in enumerate(seq):
        out *= _prime(i) ** v
    return out


@dataclass(frozen=True)
class Signature:
    max_height: int
    height_profile: int
    block_count: int
    block_order: tuple[str, ...]
    block_profile: int

    def as_tuple(self):
        return (self.max_height, self.height_profile, self.block_count,
                self.block_order, self.block_profile)


MAX_BLOCK_SIZE = 6


class BlockTooLarge(Exception):
    pass


def _level_counts(f: Formula) -> list[int]:
    counts: list[int] = []

    def walk(g: Formula, depth: int) -> None:
        while len(counts) <= depth:
            counts.append(0)
        counts[depth] += 1
        if isinstance(g, FNot):
            walk(g.body, depth + 1)
        elif isinstance(g, (FAnd, FOr)):
            for c in g.children:
                walk(c, depth + 1)

    walk(f, 0)
    return counts


def signature(p: Prenex, max_block: int = MAX_BLOCK_SIZE) -> Signature:
    """The five-feature tuple indexing problems in memory.

    The height profile packs the cumulative vertex counts per tree level
    (root level first); the block profile packs quantified point variable
    counts per quantifier block.
    """
    levels = _level_counts(p.matrix)
    cumulative = []
    running = 0
    for c in levels:
        running += c
        cumulative.append(running)
    blocks = p.blocks
    for q, vs in blocks:
        if len(vs) > max_block:
            raise BlockTooLarge(
                f"quantifier block of size {len(vs)} exceeds limit {max_block}")
    return Signature(
        max_height=len(levels),
        height_profile=xi(cumulative),
        block_count=len(blocks),
        block_order=tuple(q for q, _ in blocks),
        block_profile=xi([len(vs) for _, vs in blocks]),
    )


# ---------------------------------------------------------------------------
# Structural equivalence (similarity) and the variable map


class InconsistentMap(Exception):
    pass


class VariableMap:
    """Bidirectionally unique pairs (target variable, stored variable)."""

    def __init__(self):
        self.pairs: list[tuple[str, str]] = []
        self.fwd: dict[str, str] = {}
        self.rev: dict[str, str] = {}

    def add(self, target: str, stored: str) -> bool:
        if self.fwd.get(target, stored) != stored or self.rev.get(stored, target) != target:
            return False
        if target not in self.fwd:
            self.pairs.append((target, stored))
            self.fwd[target] = stored
            self.rev[stored] = target
        return True

    def copy(self) -> "VariableMap":
        out = VariableMap()
        out.pairs = list(self.pairs)
        out.fwd = dict(self.fwd)
        out.rev = dict(self.rev)
        return out

    def __repr__(self):
        return f"VariableMap({self.pairs})"


MAX_RUN_PERMUTATIONS = 8

_visit_counter = [0]  # node visits, for the linear-runtime property test


def _match_terms(t1: Term, t2: Term, vm: VariableMap) -> bool:
    if type(t1) is not type(t2):
        return False
    if isinstance(t1, Const):
        return t1.value == t2.value
    if isinstance(t1, Sym):
        return vm.add(t1.name, t2.name)
    if isinstance(t1, Coord):
        return t1.axis == t2.axis and vm.add(t1.point, t2.point)
    if isinstance(t1, BinOp):
        return (t1.op == t2.op and _match_terms(t1.left, t2.left, vm)
                and _match_terms(t1.right, t2.right, vm))
    if isinstance(t1, SqrtT):
        return _match_terms(t1.arg, t2.arg, vm)
    return False


def _match_pargs(a1, a2, vm: VariableMap) -> bool:
    if type(a1) is not type(a2):
        return False
    if isinstance(a1, PVar):
        return vm.add(a1.name, a2.name)
    if isinstance(a1, PLit):
        return a1 == a2
    if isinstance(a1, SegArg):
        return _match_pargs(a1.a, a2.a, vm) and _match_pargs(a1.b, a2.b, vm)
    if isinstance(a1, TriArg):
        return all(_match_pargs(p, q, vm)
                   for p, q in zip((a1.a, a1.b, a1.c), (a2.a, a2.b, a2.c)))
    if isinstance(a1, CurveArg):
        return len(a1.vertices) == len(a2.vertices) and all(
            _match_pargs(p, q, vm) for p, q in zip(a1.vertices, a2.vertices))
    if isinstance(a1, RegionArg):
        return (len(a1.boundary) == len(a2.boundary)
                and len(a1.triangles) == len(a2.triangles)
                and all(_match_pargs(p, q, vm) for p, q in zip(a1.boundary, a2.boundary))
                and all(_match_pargs(p, q, vm) for p, q in zip(a1.triangles, a2.triangles)))
    if isinstance(a1, Term):
        return _match_terms(a1, a2, vm)
    return False


def _match_nodes(f1: Formula, f2: Formula, vm: VariableMap,
                 roles1: dict, roles2: dict) -> Optional[VariableMap]:
    _visit_counter[0] += 1
    if type(f1) is not type(f2):
        return None
    if isinstance(f1, FAtom):
        a1, a2 = f1.atom, f2.atom
        if type(a1) is not type(a2):
            return None
        trial = vm.copy()
        if isinstance(a1, Rel):
            if a1.op != a2.op:
                return None
            if _match_terms(a1.lhs, a2.lhs, trial) and _match_terms(a1.rhs, a2.rhs, trial):
                return trial
            return None
        if a1.name != a2.name or len(a1.args) != len(a2.args):
            return None
        if all(_match_pargs(x, y, trial) for x, y in zip(a1.args, a2.args)):
            return trial
        return None
    if isinstance(f1, FNot):
        return _match_nodes(f1.body, f2.body, vm, roles1, roles2)
    if isinstance(f1, (FAnd, FOr)):
        if len(f1.children) != len(f2.children):
            return None
        # Children are canonically sorted; keys may tie, so match run by run
        # with backtracking inside each equal-key run.
        k1 = [_node_key(c, roles1) for c in f1.children]
        k2 = [_node_key(c, roles2) for c in f2.children]
        if k1 != k2:
            return None
        runs: list[tuple[int, int]] = []
        i = 0
        while i < len(k1):
            j = i
            while j < len(k1) and k1[j] == k1[i]:
                j += 1
            runs.append((i, j))
            i = j
        return _match_runs(list(f1.children), list(f2.children), runs, 0, vm, roles1, roles2)
    raise MalformedFormula("matrix must be quantifier-free")


def _match_runs(kids1, kids2, runs, ri, vm, roles1, roles2) -> Optional[VariableMap]:
    if ri == len(runs):
        return vm
    lo, hi = runs[ri]
    if hi - lo == 1:
        nxt = _match_nodes(kids1[lo], kids2[lo], vm, roles1, roles2)
        if nxt is None:
            return None
        return _match_runs(kids1, kids2, runs, ri + 1, nxt, roles1, roles2)
    if hi - lo > MAX_RUN_PERMUTATIONS:
        # Canonical order is stable, so same-pipeline problems align
        # positionally; permutation search is reserved for small runs.
        cur = vm
        for i in range(lo, hi):
            cur = _match_nodes(kids1[i], kids2[i], cur, roles1, roles2)
            if cur is None:
                return None
        return _match_runs(kids1, kids2, runs, ri + 1, cur, roles1, roles2)

    def backtrack(used: set[int], idx: int, cur: VariableMap) -> Optional[VariableMap]:
        if idx == hi:
            return _match_runs(kids1, kids2, runs, ri + 1, cur, roles1, roles2)
        for j in range(lo, hi):
            if j in used:
                continue
            nxt = _match_nodes(kids1[idx], kids2[j], cur, roles1, roles2)
            if nxt is not None:
                res = backtrack(used | {j}, idx + 1, nxt)
                if res is not None:
                    return res
        return None

    return backtrack(set(), lo, vm)


def similar(p1: Prenex, p2: Prenex) -> tuple[bool, Optional[VariableMap]]:
    """Structural equivalence test; returns the first consistent variable map.

    Both problems must be canonicalized.  Quantifier blocks must agree in
    order and size; variables within one block are unordered and bound
    variables may only map within corresponding blocks.
    """
    if signature(p1) != signature(p2):
        return False, None
    roles1 = _block_roles(p1.prefix)
    roles2 = _block_roles(p2.prefix)
    vm = VariableMap()
    result = _match_nodes(p1.matrix, p2.matrix, vm, roles1, roles2)
    if result is None:
        return False, None
    # Bound variables must correspond within the same block.
    for tgt, sto in result.pairs:
        r1, r2 = roles1.get(tgt), roles2.get(sto)
        if (r1 is None) != (r2 is None) or (r1 is not None and r1 != r2):
            return False, None
    return True, result


def similarity_visits() -> int:
    return _visit_counter[0]


def map_solution(stored_solution: Formula, vm: VariableMap) -> Formula:
    """Transfer a stored quantifier-free solution by variable renaming.

    Every stored-side variable occurring in the solution must be mapped;
    a miss signals an inconsistency in similar().
    """
    pts, scs = free_vars(stored_solution)
    pmap: dict[str, PointArg] = {}
    smap: dict[str, Term] = {}
    for v in pts:
        if v not in vm.rev:
            raise InconsistentMap(f"stored point variable {v} has no target partner")
        pmap[v] = PVar(vm.rev[v])
    for v in scs:
        if v not in vm.rev:
            raise InconsistentMap(f"stored scalar variable {v} has no target partner")
        smap[v] = Sym(vm.rev[v])
    return substitute(stored_solution, pmap, smap)


# ---------------------------------------------------------------------------
# Ground evaluation


def _eval_atom(a: Atom, env: dict) -> bool:
    from . import geometry  # local import; geometry depends on this module

    if isinstance(a, Rel):
        lhs = eval_term(a.lhs, env)
        rhs = eval_term(a.rhs, env)
        s = lhs.compare(rhs)
        return {
            "<": s < 0, "<=": s <= 0, "=": s == 0,
            "!=": s != 0, ">=": s >= 0, ">": s > 0,
        }[a.op]
    return geometry.eval_base_predicate(a, env)


def evaluate_ground(f: Formula, env: dict) -> bool:
    """Exact boolean value of a quantifier-free formula under a full assignment."""
    if isinstance(f, FAtom):
        return _eval_atom(f.atom, env)
    if isinstance(f, FNot):
        return not evaluate_ground(f.body, env)
    if isinstance(f, FAnd):
        return all(evaluate_ground(c, env) for c in f.children)
    if isinstance(f, FOr):
        return any(evaluate_ground(c, env) for c in f.children)
    if isinstance(f, FQuant):
        raise MalformedFormula("ground evaluation requires a quantifier-free formula")
    raise MalformedFormula(f"unknown formula node {f!r}")


# ---------------------------------------------------------------------------
# Canonical textual serialization (one S-expression per problem); round-trips
# exactly, used by memory persistence and test fixtures.


def _rat_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def term_str(t: Term) -> str:
    if isinstance(t, Const):
        return _rat_str(t.value)
    if isinstance(t, Sym):
        return f"(sym {t.name})"
    if isinstance(t, Coord):
        return f"(. {t.point} {t.axis})"
    if isinstance(t, BinOp):
        return f"({t.op} {term_str(t.left)} {term_str(t.right)})"
    if isinstance(t, SqrtT):
        return f"(sqrt {term_str(t.arg)})"
    raise ValueError(f"unknown term {t!r}")


def _parg_str(arg) -> str:
    if isinstance(arg, PVar):
        return f"(pt {arg.name})"
    if isinstance(arg, PLit):
        return f"(xy {_rat_str(arg.x)} {_rat_str(arg.y)})"
    if isinstance(arg, SegArg):
        return f"(segment {_parg_str(arg.a)} {_parg_str(arg.b)})"
    if isinstance(arg, TriArg):
        return f"(triangle {_parg_str(arg.a)} {_parg_str(arg.b)} {_parg_str(arg.c)})"
    if isinstance(arg, CurveArg):
        return "(curveobj " + " ".join(_parg_str(p) for p in arg.vertices) + ")"
    if isinstance(arg, RegionArg):
        b = " ".join(_parg_str(p) for p in arg.boundary)
        t = " ".join(_parg_str(x) for x in arg.triangles)
        return f"(regionobj (boundary {b}) (tris {t}))"
    if isinstance(arg, Term):
        return f"(scalar {term_str(arg)})"
    raise ValueError(f"unknown arg {arg!r}")


def formula_str(f: Formula) -> str:
    if isinstance(f, FAtom):
        a = f.atom
        if isinstance(a, Rel):
            return f"({a.op} {term_str(a.lhs)} {term_str(a.rhs)})"
        return f"({a.name}" + ("" if not a.args else " " + " ".join(_parg_str(x) for x in a.args)) + ")"
    if isinstance(f, FNot):
        return f"(not {formula_str(f.body)})"
    if isinstance(f, FAnd):
        return "(and " + " ".join(formula_str(c) for c in f.children) + ")"
    if isinstance(f, FOr):
        return "(or " + " ".join(formula_str(c) for c in f.children) + ")"
    if isinstance(f, FQuant):
        q = "exists" if f.quant == EXISTS else "forall"
        return f"({q} {f.var} {formula_str(f.body)})"
    raise ValueError(f"unknown formula {f!r}")


def prenex_str(p: Prenex) -> str:
    pre = " ".join(f"({'exists' if q == EXISTS else 'forall'} {v})" for q, v in p.prefix)
    return f"(prenex ({pre}) {formula_str(p.matrix)})"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokenize(s: str) -> list[str]:
    return _TOKEN.findall(s)


def _read(tokens: list[str], pos: int):
    tok = tokens[pos]
    if tok == "(":
        out = []
        pos += 1
        while tokens[pos] != ")":
            node, pos = _read(tokens, pos)
            out.append(node)
        return out, pos + 1
    if tok == ")":
        raise ValueError("unbalanced parenthesis")
    return tok, pos + 1


_REL_OPS = {"<", "<=", "=", "!=", ">=", ">"}
_BIN_OPS = {"+", "-", "*", "/"}


def _sx_term(node) -> Term:
    if isinstance(node, str):
        return Const(Fraction(node))
    head = node[0]
    if head == "sym":
        return Sym(node[1])
    if head == ".":
        return Coord(node[1], node[2])
    if head == "sqrt":
        return SqrtT(_sx_term(node[1]))
    if head in _BIN_OPS:
        return BinOp(head, _sx_term(node[1]), _sx_term(node[2]))
    raise ValueError(f"bad term sexpr {node!r}")


def _sx_parg(node):
    head = node[0]
    if head == "pt":
        return PVar(node[1])
    if head == "xy":
        return PLit(Fraction(node[1]), Fraction(node[2]))
    if head == "segment":
        return SegArg(_sx_parg(node[1]), _sx_parg(node[2]))
    if head == "triangle":
        return TriArg(_sx_parg(node[1]), _sx_parg(node[2]), _sx_parg(node[3]))
    if head == "curveobj":
        return CurveArg(tuple(_sx_parg(p) for p in node[1:]))
    if head == "regionobj":
        boundary = tuple(_sx_parg(p) for p in node[1][1:])
        tris = tuple(_sx_parg(p) for p in node[2][1:])
        return RegionArg(boundary, tris)
    if head == "scalar":
        return _sx_term(node[1])
    raise ValueError(f"bad arg sexpr {node!r}")


def _sx_formula(node) -> Formula:
    head = node[0]
    if head in _REL_OPS:
        return FAtom(Rel(head, _sx_term(node[1]), _sx_term(node[2])))
    if head == "not":
        return FNot(_sx_formula(node[1]))
    if head == "and":
        return FAnd(tuple(_sx_formula(c) for c in node[1:]))
    if head == "or":
        return FOr(tuple(_sx_formula(c) for c in node[1:]))
    if head in ("exists", "forall"):
        return FQuant(EXISTS if head == "exists" else FORALL, node[1], _sx_formula(node[2]))
    args = tuple(_sx_parg(a) for a in node[1:])
    return FAtom(Pred(head, args))


def parse_formula_str(s: str) -> Formula:
    node, pos = _read(_tokenize(s), 0)
    return _sx_formula(node)


def parse_prenex_str(s: str) -> Prenex:
    node, _ = _read(_tokenize(s), 0)
    if node[0] != "prenex":
        raise ValueError("not a prenex serialization")
    prefix = tuple((EXISTS if q == "exists" else FORALL, v) for q, v in node[1])
    return Prenex(prefix, _sx_formula(node[2]))

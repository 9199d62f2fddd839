"""Exact-rational geometric objects and base predicate semantics.

Points are pairs of Fractions; curves are polylines; regions are simple
CCW polygons with an ear-clipping triangulation.  All predicates are decided
exactly; square roots appear only in distances/lengths and are kept as exact
radical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .exactmath import Radical, to_rat
from . import formulas as F

Point = tuple[Fraction, Fraction]


def pt(x, y) -> Point:
    return (to_rat(x), to_rat(y))


class GeometryError(Exception):
    pass


def cross(o: Point, a: Point, b: Point) -> Fraction:
    """Cross product of (a-o) x (b-o); positive iff o,a,b turn CCW."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def signed_area3(a: Point, b: Point, c: Point) -> Fraction:
    return cross(a, b, c) / 2


def dot(o: Point, a: Point, b: Point) -> Fraction:
    return (a[0] - o[0]) * (b[0] - o[0]) + (a[1] - o[1]) * (b[1] - o[1])


def dist_sq(a: Point, b: Point) -> Fraction:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def distance(a: Point, b: Point) -> Radical:
    return Radical.sqrt_of_rat(dist_sq(a, b))


def point_on_segment(p: Point, a: Point, b: Point) -> bool:
    if cross(a, b, p) != 0:
        return False
    return dot(a, p, b) >= 0 and dot(b, p, a) >= 0


def dist_sq_point_segment(p: Point, a: Point, b: Point) -> Fraction:
    d2 = dist_sq(a, b)
    if d2 == 0:
        return dist_sq(p, a)
    t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / d2
    t = max(Fraction(0), min(Fraction(1), t))
    q = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
    return dist_sq(p, q)


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """Closed segment intersection, exact."""
    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
       ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    for (a, b, c, d) in ((q1, q2, p1, d1), (q1, q2, p2, d2),
                         (p1, p2, q1, d3), (p1, p2, q2, d4)):
        if d == 0 and point_on_segment(c, a, b):
            return True
    return False


def segments_cross_properly(p1, p2, q1, q2) -> bool:
    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    return ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
           ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0))


# ---------------------------------------------------------------------------
# Objects


@dataclass(frozen=True)
class Segment:
    a: Point
    b: Point

    def __post_init__(self):
        if self.a == self.b:
            raise GeometryError(f"degenerate segment at {self.a}")


@dataclass(frozen=True)
class Curve:
    vertices: tuple[Point, ...]

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise GeometryError("curve needs at least two vertices")
        for u, v in zip(self.vertices, self.vertices[1:]):
            if u == v:
                raise GeometryError(f"repeated consecutive vertex {u}")

    def segments(self) -> list[Segment]:
        return [Segment(u, v) for u, v in zip(self.vertices, self.vertices[1:])]

    def length(self) -> Radical:
        total = Radical()
        for u, v in zip(self.vertices, self.vertices[1:]):
            total = total + distance(u, v)
        return total

    def closed(self) -> bool:
        return self.vertices[0] == self.vertices[-1]


@dataclass(frozen=True)
class Triangle:
    a: Point
    b: Point
    c: Point

    def area(self) -> Fraction:
        return signed_area3(self.a, self.b, self.c)

    def points(self) -> tuple[Point, Point, Point]:
        return (self.a, self.b, self.c)


def triangle_ccw(a: Point, b: Point, c: Point) -> Triangle:
    t = Triangle(a, b, c)
    if t.area() == 0:
        raise GeometryError(f"degenerate triangle {a} {b} {c}")
    return t if t.area() > 0 else Triangle(a, c, b)


def point_in_triangle(p: Point, t: Triangle, closed: bool = True) -> bool:
    """CCW triangle required; closed includes the boundary."""
    if t.area() <= 0:
        raise GeometryError("triangle must be CCW")
    for u, v in ((t.a, t.b), (t.b, t.c), (t.c, t.a)):
        s = cross(u, v, p)
        if closed:
            if s < 0:
                return False
        else:
            if s <= 0:
                return False
    return True


def polygon_area(vertices: Sequence[Point]) -> Fraction:
    total = Fraction(0)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2


def polygon_simple(vertices: Sequence[Point]) -> tuple[bool, tuple[int, int] | None]:
    """Check simplicity; returns offending edge pair if crossing."""
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            a, b = edges[i]
            c, d = edges[j]
            if adjacent:
                if segments_cross_properly(a, b, c, d):
                    return False, (i, j)
                continue
            if segments_intersect(a, b, c, d):
                return False, (i, j)
    return True, None


def _is_ear(poly: list[Point], i: int) -> bool:
    n = len(poly)
    a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
    if cross(a, b, c) <= 0:
        return False
    tri = Triangle(a, b, c)
    for j in range(n):
        p = poly[j]
        if p in (a, b, c):
            continue
        if point_in_triangle(p, tri, closed=True):
            return False
    return True


def ear_clip(vertices: Sequence[Point]) -> list[Triangle]:
    """O(n^2) ear clipping of a CCW (weakly) simple polygon.

    Tolerates the duplicated vertices produced by hole bridging: zero-area
    spikes are dropped instead of clipped.
    """
    poly = list(vertices)
    if polygon_area(poly) < 0:
        poly.reverse()
    out: list[Triangle] = []
    guard = 0
    while len(poly) > 3:
        guard += 1
        if guard > 4 * len(vertices) ** 2:
            raise GeometryError("ear clipping did not converge; polygon not simple?")
        n = len(poly)
        clipped = False
        # Drop doubling-back spikes (bridge travel); straight-through
        # collinear vertices stay and resolve via ordinary ears.
        for i in range(n):
            a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
            if b == a or b == c or (cross(a, b, c) == 0 and dot(b, a, c) >= 0):
                del poly[i]
                clipped = True
                break
        if clipped:
            continue
        for i in range(n):
            if _is_ear(poly, i):
                a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
                out.append(Triangle(a, b, c))
                del poly[i]
                clipped = True
                break
        if not clipped:
            raise GeometryError("no ear found; polygon not simple?")
    if len(poly) == 3:
        a, b, c = poly
        if cross(a, b, c) != 0:
            out.append(Triangle(a, b, c) if cross(a, b, c) > 0 else Triangle(a, c, b))
    return out


@dataclass(frozen=True)
class Region:
    """Simple polygon, CCW boundary, triangulated at construction."""

    boundary: tuple[Point, ...]
    triangles: tuple[Triangle, ...] = field(default=(), compare=False)

    @staticmethod
    def from_boundary(vertices: Sequence[Point], check_simple: bool = True) -> "Region":
        verts = list(vertices)
        if len(verts) >= 2 and verts[0] == verts[-1]:
            verts = verts[:-1]
        if len(verts) < 3:
            raise GeometryError("region needs at least three boundary vertices")
        if check_simple:
            ok, pair = polygon_simple(verts)
            if not ok:
                raise GeometryError(f"self-intersecting boundary: edges {pair[0]} and {pair[1]} cross")
        if polygon_area(verts) < 0:
            verts.reverse()
        tris = ear_clip(verts)
        return Region(tuple(verts), tuple(tris))

    @staticmethod
    def from_bridged(vertices: Sequence[Point]) -> "Region":
        """Weakly simple polygon (hole bridges allowed); no simplicity check."""
        verts = list(vertices)
        if polygon_area(verts) < 0:
            verts.reverse()
        tris = ear_clip(verts)
        return Region(tuple(verts), tuple(tris))

    def area(self) -> Fraction:
        return sum((t.area() for t in self.triangles), Fraction(0))

    def contains(self, p: Point, closed: bool = True) -> bool:
        return any(point_in_triangle(p, t, closed=closed) for t in self.triangles)


def rect_region(lo: Point, hi: Point) -> Region:
    (x0, y0), (x1, y1) = lo, hi
    if not (x0 < x1 and y0 < y1):
        raise GeometryError("degenerate rectangle")
    return Region.from_boundary([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


# ---------------------------------------------------------------------------
# Complement regions (bounding box minus a region), built by bridging the
# reversed boundary into the box ring and re-triangulating.


def _strictly_inside_box(p: Point, box: Region) -> bool:
    xs = [v[0] for v in box.boundary]
    ys = [v[1] for v in box.boundary]
    return min(xs) < p[0] < max(xs) and min(ys) < p[1] < max(ys)


def bridge_holes(outer: Sequence[Point], holes: Sequence[Sequence[Point]]) -> list[Point]:
    """Cut CW holes into a CCW outer ring via vertical bridges.

    Each hole's topmost vertex is connected straight up to the first edge of
    the current polygon above it; holes are processed top-down so bridges
    never cross each other.
    """
    poly = list(outer)
    if polygon_area(poly) < 0:
        poly.reverse()
    ordered = sorted(holes, key=lambda h: max(v[1] for v in h), reverse=True)
    for hole in ordered:
        hole = list(hole)
        if polygon_area(hole) > 0:
            hole.reverse()  # holes run CW
        k = max(range(len(hole)), key=lambda i: (hole[i][1], -hole[i][0]))
        hx, hy = hole[k]
        # first polygon edge strictly above (hx, hy) crossed by the vertical ray
        best = None
        n = len(poly)
        for i in range(n):
            a, b = poly[i], poly[(i + 1) % n]
            if (a[0] - hx) * (b[0] - hx) > 0:
                continue
            if a[0] == b[0]:
                if a[0] != hx:
                    continue
                ylo = min(a[1], b[1])
                yhit = max(ylo, hy)
                if max(a[1], b[1]) <= hy:
                    continue
                y = max(ylo, hy)
                cand = y if y > hy else min(a[1], b[1])
                if cand <= hy:
                    cand = max(a[1], b[1])
                yv = cand
            else:
                tpar = Fraction(hx - a[0], b[0] - a[0])
                if tpar < 0 or tpar > 1:
                    continue
                yv = a[1] + tpar * (b[1] - a[1])
            if yv <= hy:
                continue
            if best is None or yv < best[0]:
                best = (yv, i)
        if best is None:
            raise GeometryError("hole has no polygon edge above it")
        yv, i = best
        bridge_pt = (hx, yv)
        rotated = hole[k:] + hole[:k]
        insertion = [bridge_pt] + rotated + [rotated[0], bridge_pt]
        poly = poly[: i + 1] + insertion + poly[i + 1:]
    return poly


def complement_region(r: Region, bbox: Region) -> Region:
    """Triangulated bbox-minus-r; r must lie strictly inside bbox."""
    for v in r.boundary:
        if not _strictly_inside_box(v, bbox):
            raise GeometryError(f"region vertex {v} not strictly inside the bounding box")
    poly = bridge_holes(bbox.boundary, [list(r.boundary)])
    out = Region.from_bridged(poly)
    return out


# ---------------------------------------------------------------------------
# Formula expansions of the base predicates


def seg_arg(s: Segment) -> F.SegArg:
    return F.SegArg(F.PLit(*s.a), F.PLit(*s.b))


def tri_arg(t: Triangle) -> F.TriArg:
    return F.TriArg(F.PLit(*t.a), F.PLit(*t.b), F.PLit(*t.c))


def curve_arg(c: Curve) -> F.CurveArg:
    return F.CurveArg(tuple(F.PLit(*v) for v in c.vertices))


def region_arg(r: Region) -> F.RegionArg:
    return F.RegionArg(tuple(F.PLit(*v) for v in r.boundary),
                       tuple(tri_arg(t) for t in r.triangles))


def _coord(arg: F.PointArg, axis: str) -> F.Term:
    if isinstance(arg, F.PVar):
        return F.Coord(arg.name, axis)
    return F.Const(arg.x if axis == "x" else arg.y)


def expand_on_segment(p: F.PointArg, seg: F.SegArg, tvar: str = "$t") -> F.Formula:
    """The parametric membership formula: exists t in [0,1] with lerp(seg,t) = p.

    The parameter is a scalar (name prefixed with $); the quantifier is the
    definitional one from the modeling language.
    """
    if not tvar.startswith("$"):
        tvar = "$" + tvar
    t = F.Sym(tvar)
    fx = F.add(_coord(seg.a, "x"), F.mul(t, F.sub(_coord(seg.b, "x"), _coord(seg.a, "x"))))
    fy = F.add(_coord(seg.a, "y"), F.mul(t, F.sub(_coord(seg.b, "y"), _coord(seg.a, "y"))))
    body = F.conj([
        FAtomRel("<=", F.const(0), t),
        FAtomRel("<=", t, F.const(1)),
        FAtomRel("=", fx, _coord(p, "x")),
        FAtomRel("=", fy, _coord(p, "y")),
    ])
    return F.FQuant(F.EXISTS, tvar, body)


def FAtomRel(op: str, lhs: F.Term, rhs: F.Term) -> F.Formula:
    return F.FAtom(F.Rel(op, lhs, rhs))


def _area_term(a: F.PointArg, b: F.PointArg, p: F.PointArg) -> F.Term:
    ax, ay = _coord(a, "x"), _coord(a, "y")
    bx, by = _coord(b, "x"), _coord(b, "y")
    px, py = _coord(p, "x"), _coord(p, "y")
    return F.sub(
        F.mul(F.sub(bx, ax), F.sub(py, ay)),
        F.mul(F.sub(by, ay), F.sub(px, ax)),
    )


def expand_inside_triangle(p: F.PointArg, tri: F.TriArg, closed: bool = True) -> F.Formula:
    """Conjunction of three left-of conditions; CCW triangle required when ground."""
    pts = (tri.a, tri.b, tri.c)
    if all(isinstance(x, F.PLit) for x in pts):
        area = signed_area3(*(((x.x, x.y)) for x in pts))
        if area < 0:
            raise GeometryError("triangle must be CCW")
        if area == 0:
            raise GeometryError("degenerate triangle in Inside expansion")
    op = ">=" if closed else ">"
    conds = []
    for u, v in ((tri.a, tri.b), (tri.b, tri.c), (tri.c, tri.a)):
        conds.append(FAtomRel(op, _area_term(u, v, p), F.const(0)))
    return F.conj(conds)


def distance_term(p: F.PointArg, q: F.PointArg) -> F.Term:
    dx = F.sub(_coord(p, "x"), _coord(q, "x"))
    dy = F.sub(_coord(p, "y"), _coord(q, "y"))
    return F.SqrtT(F.add(F.mul(dx, dx), F.mul(dy, dy)))


def dist_sq_term(p: F.PointArg, q: F.PointArg) -> F.Term:
    dx = F.sub(_coord(p, "x"), _coord(q, "x"))
    dy = F.sub(_coord(p, "y"), _coord(q, "y"))
    return F.add(F.mul(dx, dx), F.mul(dy, dy))


# ---------------------------------------------------------------------------
# Ground evaluation of base predicates (used by evaluate_ground)


def _arg_point(arg, env: dict) -> Point:
    if isinstance(arg, F.PVar):
        if arg.name not in env:
            raise F.EvaluationError(f"unbound point {arg.name}")
        return env[arg.name]
    if isinstance(arg, F.PLit):
        return (arg.x, arg.y)
    raise F.EvaluationError(f"not a point argument: {arg!r}")


def eval_base_predicate(a: F.Pred, env: dict) -> bool:
    name = a.name
    if name == "On":
        p = _arg_point(a.args[0], env)
        target = a.args[1]
        if isinstance(target, F.SegArg):
            return point_on_segment(p, _arg_point(target.a, env), _arg_point(target.b, env))
        if isinstance(target, F.CurveArg):
            vs = [_arg_point(v, env) for v in target.vertices]
            return any(point_on_segment(p, u, v) for u, v in zip(vs, vs[1:]))
        raise F.EvaluationError(f"On expects a segment or curve, got {target!r}")
    if name == "Inside":
        p = _arg_point(a.args[0], env)
        target = a.args[1]
        if isinstance(target, F.TriArg):
            tri = triangle_ccw(*(_arg_point(x, env) for x in (target.a, target.b, target.c)))
            return point_in_triangle(p, tri, closed=True)
        if isinstance(target, F.RegionArg):
            tris = [triangle_ccw(*(_arg_point(x, env) for x in (t.a, t.b, t.c)))
                    for t in target.triangles]
            return any(point_in_triangle(p, t, closed=True) for t in tris)
        raise F.EvaluationError(f"Inside expects a triangle or region, got {target!r}")
    raise F.EvaluationError(f"predicate {name} is not ground-evaluable; expand it first")


# ---------------------------------------------------------------------------
# Point-set properties and rigid actions


def centroid(points: Sequence[Point]) -> Point:
    n = len(points)
    if n == 0:
        raise GeometryError("centroid of an empty set")
    sx = sum((p[0] for p in points), Fraction(0))
    sy = sum((p[1] for p in points), Fraction(0))
    return (sx / n, sy / n)


def variance(points: Sequence[Point]) -> Fraction:
    c = centroid(points)
    n = len(points)
    return sum((dist_sq(p, c) for p in points), Fraction(0)) / n


def translate_point(p: Point, tx, ty) -> Point:
    return (p[0] + to_rat(tx), p[1] + to_rat(ty))


def _rot_coeffs(theta_degrees) -> tuple[Fraction, Fraction, bool]:
    """cos/sin as exact rationals for multiples of 90, else 1e-12 approximations."""
    th = to_rat(theta_degrees) % 360
    table = {0: (1, 0), 90: (0, 1), 180: (-1, 0), 270: (0, -1)}
    if th.denominator == 1 and int(th) in table:
        c, s = table[int(th)]
        return Fraction(c), Fraction(s), True
    rad = math.radians(float(th))
    scale = 10 ** 12
    return (Fraction(round(math.cos(rad) * scale), scale),
            Fraction(round(math.sin(rad) * scale), scale), False)


def rotate_point(p: Point, center: Point, theta_degrees) -> Point:
    c, s, _ = _rot_coeffs(theta_degrees)
    dx, dy = p[0] - center[0], p[1] - center[1]
    return (center[0] + c * dx - s * dy, center[1] + s * dx + c * dy)


def reflect_point(p: Point, a: Point, b: Point) -> Point:
    d2 = dist_sq(a, b)
    if d2 == 0:
        raise GeometryError("reflection axis is degenerate")
    t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / d2
    foot = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
    return (2 * foot[0] - p[0], 2 * foot[1] - p[1])


def scale_point(p: Point, center: Point, sx, sy) -> Point:
    sx, sy = to_rat(sx), to_rat(sy)
    return (center[0] + sx * (p[0] - center[0]), center[1] + sy * (p[1] - center[1]))


def map_object(obj, fn):
    """Apply a point map to a Point/Segment/Curve/Region."""
    if isinstance(obj, tuple) and len(obj) == 2 and not isinstance(obj[0], tuple):
        return fn(obj)
    if isinstance(obj, Segment):
        return Segment(fn(obj.a), fn(obj.b))
    if isinstance(obj, Curve):
        return Curve(tuple(fn(v) for v in obj.vertices))
    if isinstance(obj, Region):
        return Region.from_boundary([fn(v) for v in obj.boundary])
    raise GeometryError(f"cannot transform {obj!r}")


# ---------------------------------------------------------------------------
# Diagram


@dataclass
class Diagram:
    bbox: Region
    objects: dict[str, object] = field(default_factory=dict)

    def add(self, label: str, obj) -> None:
        if label in self.objects:
            raise GeometryError(f"duplicate label {label}")
        for v in _object_vertices(obj):
            if not _strictly_inside_box(v, self.bbox):
                raise GeometryError(f"object {label} not strictly inside the bounding box")
        self.objects[label] = obj


def _object_vertices(obj) -> list[Point]:
    if isinstance(obj, tuple):
        return [obj]
    if isinstance(obj, Segment):
        return [obj.a, obj.b]
    if isinstance(obj, Curve):
        return list(obj.vertices)
    if isinstance(obj, Region):
        return list(obj.boundary)
    return []

"""Independent test oracles.

Everything here is deliberately written from scratch against textbook
definitions (shoelace, ray casting, brute-force flood fill, grid sampling)
and must not import the solver's geometry or engine internals beyond plain
data types.
"""

from __future__ import annotations

import random
from fractions import Fraction

Point = tuple[Fraction, Fraction]


def shoelace(vertices) -> Fraction:
    total = Fraction(0)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2


def collinear_on_box(p: Point, a: Point, b: Point) -> bool:
    """Point-on-segment via cross product plus bounding interval."""
    cx = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if cx != 0:
        return False
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def ray_cast_inside(p: Point, polygon) -> bool:
    """Strict interior test by ray casting; boundary points return True
    only when detected by the on-edge pre-check."""
    n = len(polygon)
    for i in range(n):
        if collinear_on_box(p, polygon[i], polygon[(i + 1) % n]):
            return True
    crossings = 0
    px, py = p
    for i in range(n):
        (x1, y1), (x2, y2) = polygon[i], polygon[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xi = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if xi > px:
                crossings += 1
    return crossings % 2 == 1


def dist_sq(a: Point, b: Point) -> Fraction:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def dist_sq_point_segment(p: Point, a: Point, b: Point) -> Fraction:
    d2 = dist_sq(a, b)
    if d2 == 0:
        return dist_sq(p, a)
    t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / d2
    t = max(Fraction(0), min(Fraction(1), t))
    q = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
    return dist_sq(p, q)


def dist_sq_point_polyline(p: Point, vertices) -> Fraction:
    return min(dist_sq_point_segment(p, a, b) for a, b in zip(vertices, vertices[1:]))


def segs_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    o1, o2 = orient(q1, q2, p1), orient(q1, q2, p2)
    o3, o4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if o1 != o2 and o3 != o4:
        return True
    return (collinear_on_box(p1, q1, q2) or collinear_on_box(p2, q1, q2)
            or collinear_on_box(q1, p1, p2) or collinear_on_box(q2, p1, p2))


def flood_fill_groups(mask) -> int:
    """Count 8-connected groups of True cells in a 2D nested list."""
    rows, cols = len(mask), len(mask[0]) if mask else 0
    seen = [[False] * cols for _ in range(rows)]
    groups = 0
    for r in range(rows):
        for c in range(cols):
            if not mask[r][c] or seen[r][c]:
                continue
            groups += 1
            stack = [(r, c)]
            seen[r][c] = True
            while stack:
                cr, cc = stack.pop()
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        nr, nc = cr + dr, cc + dc
                        if 0 <= nr < rows and 0 <= nc < cols \
                                and mask[nr][nc] and not seen[nr][nc]:
                            seen[nr][nc] = True
                            stack.append((nr, nc))
    return groups


def rand_rat(rng: random.Random, lo=-20, hi=20, den=4) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), den)


def rand_point(rng: random.Random, lo=-20, hi=20) -> Point:
    return (rand_rat(rng, lo, hi), rand_rat(rng, lo, hi))


def rand_simple_polygon(rng: random.Random, n: int, radius=10) -> list[Point]:
    """Star-shaped polygon around a random center: simple by construction."""
    import math

    cx, cy = rand_rat(rng, -5, 5), rand_rat(rng, -5, 5)
    angles = sorted(rng.uniform(0, 2 * math.pi) for _ in range(n))
    # Reject near-duplicate angles to avoid collinear/degenerate edges.
    if any(b - a < 0.05 for a, b in zip(angles, angles[1:])):
        return rand_simple_polygon(rng, n, radius)
    pts = []
    for ang in angles:
        r = rng.uniform(radius * 0.4, radius)
        x = cx + Fraction(round(r * math.cos(ang) * 8), 8)
        y = cy + Fraction(round(r * math.sin(ang) * 8), 8)
        pts.append((x, y))
    if len({p for p in pts}) < n:
        return rand_simple_polygon(rng, n, radius)
    return pts


def dijkstra_visibility_path(start, goal, polygon_region, inside_fn) -> float | None:
    """Shortest polygonal path inside a region via a visibility graph.

    inside_fn(segment_a, segment_b) must report whether the whole segment
    lies inside the region.  Returns the path length or None.
    """
    import heapq
    import math

    nodes = [start, goal] + list(polygon_region)
    n = len(nodes)
    edges: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            if nodes[i] == nodes[j]:
                continue
            if inside_fn(nodes[i], nodes[j]):
                w = math.dist((float(nodes[i][0]), float(nodes[i][1])),
                              (float(nodes[j][0]), float(nodes[j][1])))
                edges[i].append((j, w))
                edges[j].append((i, w))
    dist = {0: 0.0}
    pq = [(0.0, 0)]
    while pq:
        d, u = heapq.heappop(pq)
        if u == 1:
            return d
        if d > dist.get(u, float("inf")):
            continue
        for v, w in edges[u]:
            nd = d + w
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(pq, (nd, v))
    return None

"""Convex geometry on the ground plane: hulls, Minkowski sums, clipping, SAT.

Polygons live in (x, z) coordinates and are counter-clockwise. A polygon with
fewer than three vertices is degenerate (all source points coincident or
collinear); degenerate polygons have zero area but can still be dilated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .scene import ObjectInstance, world_corners

Point = tuple[float, float]

_COLLINEAR_EPS = 1e-12
DEFAULT_CONTACT_TOL = 1e-9
DISK_SEGMENTS = 64


@dataclass(frozen=True)
class ConvexPolygon:
    """Counter-clockwise convex polygon in the ground plane.

    Construct through :func:`convex_hull` (or ``from_points``) unless the
    vertices are already known to be a strictly convex CCW ring.
    """

    vertices: tuple[Point, ...]

    @classmethod
    def from_points(cls, points: Iterable[Point]) -> "ConvexPolygon":
        return convex_hull(points)

    @property
    def is_degenerate(self) -> bool:
        return len(self.vertices) < 3

    def translated(self, dx: float, dz: float) -> "ConvexPolygon":
        return ConvexPolygon(tuple((x + dx, z + dz) for x, z in self.vertices))


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable[Point]) -> ConvexPolygon:
    """Strictly convex hull via the monotone chain; collinear vertices dropped.

    All-coincident input yields a one-vertex degenerate polygon, collinear
    input the two extreme points.
    """
    pts = sorted({(float(x), float(z)) for x, z in points})
    if not pts:
        raise ValueError("convex_hull needs at least one point")
    if len(pts) == 1:
        return ConvexPolygon((pts[0],))

    def build(seq: Sequence[Point]) -> list[Point]:
        out: list[Point] = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= _COLLINEAR_EPS:
                out.pop()
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    ring = lower[:-1] + upper[:-1]
    if len(ring) < 3:
        return ConvexPolygon((pts[0], pts[-1]))
    return ConvexPolygon(tuple(ring))


def polygon_area(p: ConvexPolygon) -> float:
    """Shoelace area; zero for degenerate polygons."""
    if p.is_degenerate:
        return 0.0
    verts = p.vertices
    acc = 0.0
    for i, (x0, z0) in enumerate(verts):
        x1, z1 = verts[(i + 1) % len(verts)]
        acc += x0 * z1 - x1 * z0
    return abs(acc) / 2.0


def perimeter(p: ConvexPolygon) -> float:
    verts = p.vertices
    if len(verts) < 2:
        return 0.0
    total = 0.0
    for i, (x0, z0) in enumerate(verts):
        x1, z1 = verts[(i + 1) % len(verts)]
        total += math.hypot(x1 - x0, z1 - z0)
    return total if len(verts) > 2 else total / 2.0


def centroid(p: ConvexPolygon) -> Point:
    """Vertex-mean center (sufficient for markers and labels)."""
    verts = p.vertices
    n = len(verts)
    return (sum(v[0] for v in verts) / n, sum(v[1] for v in verts) / n)


def _bottom_start(verts: tuple[Point, ...]) -> tuple[Point, ...]:
    start = min(range(len(verts)), key=lambda i: (verts[i][1], verts[i][0]))
    return verts[start:] + verts[:start]


def minkowski_sum(p: ConvexPolygon, q: ConvexPolygon) -> ConvexPolygon:
    """Minkowski sum of convex polygons.

    Non-degenerate operands use the merged-edge rotating walk (edges of both
    rings consumed in polar-angle order); degenerate operands fall back to the
    hull of pairwise vertex sums, which is exact for convex sets. The result
    is normalized through :func:`convex_hull`, so its vertex count never
    exceeds ``len(p) + len(q)``.
    """
    if p.is_degenerate or q.is_degenerate:
        return convex_hull(
            [(ax + bx, az + bz) for ax, az in p.vertices for bx, bz in q.vertices]
        )
    a = _bottom_start(p.vertices)
    b = _bottom_start(q.vertices)
    n, m = len(a), len(b)
    i = j = 0
    out: list[Point] = []
    while i < n or j < m:
        out.append((a[i % n][0] + b[j % m][0], a[i % n][1] + b[j % m][1]))
        ea = (a[(i + 1) % n][0] - a[i % n][0], a[(i + 1) % n][1] - a[i % n][1])
        eb = (b[(j + 1) % m][0] - b[j % m][0], b[(j + 1) % m][1] - b[j % m][1])
        cr = ea[0] * eb[1] - ea[1] * eb[0]
        if i >= n:
            j += 1
        elif j >= m:
            i += 1
        elif cr > _COLLINEAR_EPS:
            i += 1
        elif cr < -_COLLINEAR_EPS:
            j += 1
        else:
            i += 1
            j += 1
    return convex_hull(out)


def disk_polygon(radius: float, segments: int = DISK_SEGMENTS, center: Point = (0.0, 0.0)) -> ConvexPolygon:
    """Regular polygon approximating a disk, circumradius = ``radius``."""
    if radius <= 0.0:
        raise ValueError(f"disk radius must be > 0, got {radius}")
    if segments < 3:
        raise ValueError(f"disk needs >= 3 segments, got {segments}")
    cx, cz = center
    verts = []
    for k in range(segments):
        t = 2.0 * math.pi * k / segments
        verts.append((cx + radius * math.cos(t), cz + radius * math.sin(t)))
    return ConvexPolygon(tuple(verts))


def dilate(p: ConvexPolygon, clearance: float) -> ConvexPolygon:
    """Expand a polygon by a clearance margin.

    Offset construction: every edge shifts exactly ``clearance`` along its
    outward normal and every vertex becomes a fan of points inscribed in the
    corner arc, spaced at most 2*pi/DISK_SEGMENTS apart. Edge strips thus
    contribute their exact ``perimeter * clearance`` while the corner fans
    undershoot the full disk by a factor of sin(step)/step, keeping the area
    within [A + P*r + 0.998*pi*r^2, A + P*r + pi*r^2]. A Minkowski sum with an
    inscribed disk polygon would instead undershoot on every edge whose normal
    falls between disk vertices, which breaks that band for elongated shapes.
    Degenerate inputs (points, segments) have no well-defined edge normals and
    fall back to the disk Minkowski sum; zero clearance returns the input.
    """
    if clearance < 0.0:
        raise ValueError(f"clearance must be >= 0, got {clearance}")
    if clearance == 0.0:
        return p
    if p.is_degenerate:
        return minkowski_sum(p, disk_polygon(clearance))
    step = 2.0 * math.pi / DISK_SEGMENTS
    verts = p.vertices
    n = len(verts)
    out: list[Point] = []
    for i, (vx, vz) in enumerate(verts):
        px, pz = verts[i - 1]
        qx, qz = verts[(i + 1) % n]
        a0 = math.atan2(-(vx - px), vz - pz)
        a1 = math.atan2(-(qx - vx), qz - vz)
        sweep = (a1 - a0) % (2.0 * math.pi)
        arcs = max(1, math.ceil(sweep / step))
        for j in range(arcs + 1):
            angle = a0 + sweep * j / arcs
            out.append((vx + clearance * math.cos(angle), vz + clearance * math.sin(angle)))
    return convex_hull(out)


def _clip_halfplane(verts: list[Point], a: Point, b: Point) -> list[Point]:
    """Keep the part of a polygon on the left of the directed line a -> b."""
    out: list[Point] = []
    n = len(verts)
    for k in range(n):
        cur = verts[k]
        nxt = verts[(k + 1) % n]
        d_cur = _cross(a, b, cur)
        d_nxt = _cross(a, b, nxt)
        if d_cur >= 0.0:
            out.append(cur)
        if (d_cur > 0.0 > d_nxt) or (d_cur < 0.0 < d_nxt):
            t = d_cur / (d_cur - d_nxt)
            out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
    return out


def intersection_area(p: ConvexPolygon, q: ConvexPolygon) -> float:
    """Exact overlap area of two convex polygons (Sutherland-Hodgman clip).

    Touching boundaries contribute zero.
    """
    if p.is_degenerate or q.is_degenerate:
        return 0.0
    # Clip order changes the result in the last ulp; fix it so the area is
    # symmetric in its arguments bit-for-bit.
    if q.vertices < p.vertices:
        p, q = q, p
    verts = list(q.vertices)
    ring = p.vertices
    for i in range(len(ring)):
        verts = _clip_halfplane(verts, ring[i], ring[(i + 1) % len(ring)])
        if len(verts) < 3:
            return 0.0
    acc = 0.0
    for i, (x0, z0) in enumerate(verts):
        x1, z1 = verts[(i + 1) % len(verts)]
        acc += x0 * z1 - x1 * z0
    return max(abs(acc) / 2.0, 0.0)


def contains_point(p: ConvexPolygon, point: Point, tol: float = DEFAULT_CONTACT_TOL) -> bool:
    """Whether a point lies inside (or within ``tol`` of) a convex polygon."""
    if p.is_degenerate:
        return False
    verts = p.vertices
    for i in range(len(verts)):
        a = verts[i]
        b = verts[(i + 1) % len(verts)]
        # cross < 0 means strictly right of edge a->b; scale tol by edge length
        edge_len = math.hypot(b[0] - a[0], b[1] - a[1])
        if _cross(a, b, point) < -tol * max(edge_len, 1e-12):
            return False
    return True


def _segment_distance(a: Point, b: Point, point: Point) -> float:
    ax, az = a
    bx, bz = b
    px, pz = point
    dx, dz = bx - ax, bz - az
    seg_len2 = dx * dx + dz * dz
    if seg_len2 == 0.0:
        return math.hypot(px - ax, pz - az)
    t = ((px - ax) * dx + (pz - az) * dz) / seg_len2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), pz - (az + t * dz))


def distance_to_polygon(p: ConvexPolygon, point: Point) -> float:
    """Euclidean distance from a point to a convex polygon (0 inside)."""
    if not p.vertices:
        raise ValueError("distance_to_polygon needs a non-empty polygon")
    if contains_point(p, point, tol=0.0):
        return 0.0
    verts = p.vertices
    if len(verts) == 1:
        return math.hypot(point[0] - verts[0][0], point[1] - verts[0][1])
    return min(
        _segment_distance(verts[i], verts[(i + 1) % len(verts)], point)
        for i in range(len(verts))
    )


def closest_point_on_polygon(p: ConvexPolygon, point: Point) -> Point:
    """Closest point of the polygon (boundary or interior) to ``point``."""
    if contains_point(p, point, tol=0.0):
        return point
    best: Point | None = None
    best_d = math.inf
    verts = p.vertices
    n = len(verts)
    for i in range(n):
        ax, az = verts[i]
        bx, bz = verts[(i + 1) % n] if n > 1 else verts[i]
        dx, dz = bx - ax, bz - az
        seg_len2 = dx * dx + dz * dz
        t = 0.0 if seg_len2 == 0.0 else ((point[0] - ax) * dx + (point[1] - az) * dz) / seg_len2
        t = min(1.0, max(0.0, t))
        cand = (ax + t * dx, az + t * dz)
        d = math.hypot(point[0] - cand[0], point[1] - cand[1])
        if d < best_d:
            best_d = d
            best = cand
    assert best is not None
    return best


def _projection_axes(p: ConvexPolygon) -> list[Point]:
    axes = []
    verts = p.vertices
    n = len(verts)
    for i in range(n):
        ax, az = verts[i]
        bx, bz = verts[(i + 1) % n]
        ex, ez = bx - ax, bz - az
        length = math.hypot(ex, ez)
        if length > 0.0:
            axes.append((ez / length, -ex / length))
    return axes


def _project(p: ConvexPolygon, axis: Point) -> tuple[float, float]:
    dots = [v[0] * axis[0] + v[1] * axis[1] for v in p.vertices]
    return min(dots), max(dots)


def separation(p: ConvexPolygon, q: ConvexPolygon) -> float:
    """Signed separation along the best candidate axis.

    Positive values are a guaranteed gap (the polygons are disjoint); negative
    values are the penetration depth along the least-overlapping axis. This is
    the separating-axis test for convex polygons, independent of the clipping
    path used by :func:`intersection_area`.
    """
    best = -math.inf
    for axis in _projection_axes(p) + _projection_axes(q):
        min_a, max_a = _project(p, axis)
        min_b, max_b = _project(q, axis)
        gap = max(min_b - max_a, min_a - max_b)
        if gap > best:
            best = gap
    return best


def sat_overlap(p: ConvexPolygon, q: ConvexPolygon, tol: float = DEFAULT_CONTACT_TOL) -> bool:
    """Separating-axis overlap test: True only for penetration deeper than ``tol``."""
    if p.is_degenerate or q.is_degenerate:
        return False
    return separation(p, q) < -tol


def minimal_translation(p: ConvexPolygon, q: ConvexPolygon) -> tuple[Point, float] | None:
    """Axis and depth of the smallest push that separates overlapping polygons.

    Translating q by depth along the returned unit axis makes the pair
    boundary-touching. Returns None when the polygons do not overlap.
    """
    if p.is_degenerate or q.is_degenerate:
        return None
    best_axis: Point | None = None
    best_depth = math.inf
    for axis in _projection_axes(p) + _projection_axes(q):
        min_a, max_a = _project(p, axis)
        min_b, max_b = _project(q, axis)
        if min_b >= max_a or min_a >= max_b:
            return None
        # Two ways out along this axis; the direction must follow whichever
        # push is shorter (a centroid heuristic picks the wrong side when the
        # overlap is lopsided).
        push_pos = max_a - min_b
        push_neg = max_b - min_a
        if push_pos <= push_neg and push_pos < best_depth:
            best_depth, best_axis = push_pos, axis
        elif push_neg < push_pos and push_neg < best_depth:
            best_depth, best_axis = push_neg, (-axis[0], -axis[1])
    assert best_axis is not None
    return best_axis, best_depth


def bounding_circle(p: ConvexPolygon) -> tuple[Point, float]:
    """Circle around the vertex-bounds center covering every vertex.

    Not the minimal enclosing circle, but deterministic and cheap; used for
    clearance rendering and distance heuristics.
    """
    xs = [v[0] for v in p.vertices]
    zs = [v[1] for v in p.vertices]
    cx = (min(xs) + max(xs)) / 2.0
    cz = (min(zs) + max(zs)) / 2.0
    r = max(math.hypot(x - cx, z - cz) for x, z in p.vertices)
    return (cx, cz), r


def footprint(obj: ObjectInstance) -> ConvexPolygon:
    """Ground-plane silhouette of an object: hull of its world corners."""
    return convex_hull([(c.x, c.z) for c in world_corners(obj)])

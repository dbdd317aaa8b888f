"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own geometry routines:
intersection areas come from Monte-Carlo rejection sampling and box overlap
from a from-scratch separating-axis check, so agreement is evidence rather
than tautology.
"""

from __future__ import annotations

import math

import numpy as np
from hypothesis import HealthCheck, settings

from scenelayout.geom import ConvexPolygon, convex_hull
from scenelayout.scene import ObjectInstance, Orientation, Scene, Vec3

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def box(
    object_id: str,
    *,
    half: tuple[float, float, float] = (0.5, 0.5, 0.5),
    position: tuple[float, float, float] = (0.0, 0.0, 0.0),
    yaw: float = 0.0,
    asset_id: str | None = None,
    anchors: dict[str, Vec3] | None = None,
) -> ObjectInstance:
    """Ad-hoc box object for scene assembly in tests."""
    return ObjectInstance(
        id=object_id,
        asset_id=asset_id or object_id,
        position=Vec3.of(position),
        orientation=Orientation(yaw),
        half_extents=Vec3.of(half),
        anchors=anchors or {},
    )


def scene_of(*objects: ObjectInstance) -> Scene:
    return Scene.from_objects(*objects)


def random_convex_polygon(
    rng: np.random.Generator,
    *,
    radius: float = 1.0,
    center: tuple[float, float] = (0.0, 0.0),
    n_points: int = 12,
) -> ConvexPolygon:
    """Hull of uniform points in a disk; strictly convex by construction."""
    while True:
        r = radius * np.sqrt(rng.uniform(0.05, 1.0, n_points))
        theta = rng.uniform(0.0, 2.0 * math.pi, n_points)
        xs = center[0] + r * np.cos(theta)
        zs = center[1] + r * np.sin(theta)
        hull = convex_hull(zip(xs.tolist(), zs.tolist()))
        if len(hull.vertices) >= 3:
            return hull


def polygon_contains_points(p: ConvexPolygon, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Vectorized point-in-convex-CCW-polygon test, written from scratch."""
    inside = np.ones(xs.shape, dtype=bool)
    verts = p.vertices
    for (ax, az), (bx, bz) in zip(verts, verts[1:] + verts[:1]):
        cross = (bx - ax) * (zs - az) - (bz - az) * (xs - ax)
        inside &= cross >= -1e-12
    return inside


def mc_intersection_area(
    p: ConvexPolygon,
    q: ConvexPolygon,
    rng: np.random.Generator,
    samples: int = 1_000_000,
) -> float:
    """Monte-Carlo rejection estimate of area(p ∩ q)."""
    px = [v[0] for v in p.vertices] + [v[0] for v in q.vertices]
    pz = [v[1] for v in p.vertices] + [v[1] for v in q.vertices]
    lo_x, hi_x = min(px), max(px)
    lo_z, hi_z = min(pz), max(pz)
    xs = rng.uniform(lo_x, hi_x, samples)
    zs = rng.uniform(lo_z, hi_z, samples)
    hits = polygon_contains_points(p, xs, zs) & polygon_contains_points(q, xs, zs)
    return float(hits.mean()) * (hi_x - lo_x) * (hi_z - lo_z)


def oriented_box_corners(
    cx: float, cz: float, hx: float, hz: float, yaw_deg: float
) -> list[tuple[float, float]]:
    """Ground-plane corners of an oriented box, yaw about +y taking +z to +x."""
    h = math.radians(yaw_deg)
    c, s = math.cos(h), math.sin(h)
    corners = []
    for sx, sz in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        lx, lz = sx * hx, sz * hz
        corners.append((cx + lx * c + lz * s, cz - lx * s + lz * c))
    return corners


def sat_boxes_overlap(
    a: tuple[float, float, float, float, float],
    b: tuple[float, float, float, float, float],
    tol: float = 1e-9,
) -> bool:
    """Separating-axis overlap for two (cx, cz, hx, hz, yaw_deg) boxes."""
    ca = oriented_box_corners(*a)
    cb = oriented_box_corners(*b)
    for corners in (ca, cb):
        for (ax, az), (bx, bz) in zip(corners, corners[1:] + corners[:1]):
            nx, nz = bz - az, ax - bx  # edge normal
            norm = math.hypot(nx, nz)
            nx, nz = nx / norm, nz / norm
            pa = [x * nx + z * nz for x, z in ca]
            pb = [x * nx + z * nz for x, z in cb]
            if min(pa) > max(pb) - tol or min(pb) > max(pa) - tol:
                return False
    return True

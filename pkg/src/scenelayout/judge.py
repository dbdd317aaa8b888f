"""Deterministic arrangement judge.

A scene passes a placement problem iff its total energy is at or below the
task epsilon; a failing verdict always carries at least one violation (any
term item above epsilon / item_count is reported, and when the total exceeds
epsilon at least one item must). Each violation names the offending objects,
a code describing what is wrong and, when the judged target participates, a
concrete pose correction that reduces the item's energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from . import geom
from .energy import (
    EQUAL_SPACING,
    IN_FRONT_OF,
    MUTUAL_FACING,
    ORDERED_ROW,
    REGION_PLACEMENT,
    SIDE_OF,
    STACK_ORDER,
    SYMMETRIC_PAIR,
    CultureSpec,
    EnergyBreakdown,
    PlacementProblem,
    SocialSpec,
    affordance_items,
    collision_items,
    culture_items,
    distance_items,
    distance_residual,
    facing_error,
    front_halfspace_margin,
    mirrored_point,
    side_margin,
    social_items,
    support_gap_threshold,
    total_energy,
)
from .scene import Scene, Vec3, bearing_deg, front_yaw, wrap_signed

CODE_COLLISION = "collision"
CODE_DISTANCE = "distance"
CODE_FLOATING = "floating"
CODE_ORIENTATION = "orientation"
CODE_SIDE = "side"
CODE_ORDER = "order"
CODE_STACKING = "stacking"
CODE_REGION = "region"

VIOLATION_CODES = (
    CODE_COLLISION,
    CODE_DISTANCE,
    CODE_FLOATING,
    CODE_ORIENTATION,
    CODE_SIDE,
    CODE_ORDER,
    CODE_STACKING,
    CODE_REGION,
)

CORRECTION_MARGIN = 0.01
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class Violation:
    code: str
    subject_ids: tuple[str, ...]
    magnitude: float
    suggested_delta: tuple[Vec3, float] | None = None

    def __post_init__(self) -> None:
        if self.code not in VIOLATION_CODES:
            raise ValueError(f"unknown violation code {self.code!r}")
        if self.magnitude <= 0.0:
            raise ValueError(f"violation magnitude must be > 0, got {self.magnitude}")
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))

    def as_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "code": self.code,
            "subjects": list(self.subject_ids),
            "magnitude": self.magnitude,
        }
        if self.suggested_delta is not None:
            move, yaw = self.suggested_delta
            doc["delta"] = {"move": list(move.as_tuple()), "yaw": yaw}
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Violation":
        delta = None
        if doc.get("delta") is not None:
            delta = (Vec3.of(doc["delta"]["move"]), float(doc["delta"]["yaw"]))
        return cls(doc["code"], tuple(doc["subjects"]), float(doc["magnitude"]), delta)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    violations: tuple[Violation, ...]
    energy: EnergyBreakdown

    def as_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "violations": [v.as_dict() for v in self.violations],
            "energy": {
                "collision": self.energy.collision,
                "distance": self.energy.distance,
                "affordance": self.energy.affordance,
                "social": self.energy.social,
                "culture": self.energy.culture,
                "total": self.energy.total,
            },
        }


def _face_yaw_delta(scene: Scene, subject_id: str, other_id: str, *, away: bool = False) -> float:
    """Yaw increment turning subject's front exactly onto (or away from) other."""
    subject = scene.get(subject_id)
    other = scene.get(other_id)
    d = other.position - subject.position
    if abs(d.x) < 1e-12 and abs(d.z) < 1e-12:
        return 0.0
    target = bearing_deg(d.x, d.z) + (180.0 if away else 0.0)
    return wrap_signed(target - front_yaw(subject))


def _collision_delta(
    scene: Scene, pair: tuple[str, str], target_id: str, clearance: float
) -> tuple[Vec3, float] | None:
    a, b = pair
    fa = geom.footprint(scene.get(a))
    fb = geom.footprint(scene.get(b))
    if clearance > 0.0:
        fa = geom.dilate(fa, clearance)
        fb = geom.dilate(fb, clearance)
    mtv = geom.minimal_translation(fa, fb)
    if mtv is None:
        return None
    (ax, az), depth = mtv
    sign = 1.0 if target_id == b else -1.0
    d = depth + CORRECTION_MARGIN
    return (Vec3(sign * ax * d, 0.0, sign * az * d), 0.0)


def _side_axis(scene: Scene, spec: SocialSpec) -> tuple[float, float]:
    """World direction of the requested side in the related object's frame."""
    related = scene.get(spec.participants[1])
    heading = math.radians(front_yaw(related))
    right = (math.cos(heading), -math.sin(heading))
    return right if spec.side == "right" else (-right[0], -right[1])


def _row_midpoint_delta(scene: Scene, spec: SocialSpec, target_id: str) -> tuple[Vec3, float] | None:
    ids = spec.participants
    if target_id not in ids:
        return None
    i = ids.index(target_id)
    if i == 0 or i == len(ids) - 1:
        return None
    prev_p = scene.get(ids[i - 1]).position
    next_p = scene.get(ids[i + 1]).position
    cur = scene.get(target_id).position
    mid = Vec3((prev_p.x + next_p.x) / 2, cur.y, (prev_p.z + next_p.z) / 2)
    return (mid - cur, 0.0)


def _stack_delta(scene: Scene, spec: CultureSpec, target_id: str) -> tuple[Vec3, float] | None:
    ids = spec.participants
    if target_id not in ids:
        return None
    i = ids.index(target_id)
    if i == 0:
        return None
    lower = scene.get(ids[i - 1])
    upper = scene.get(target_id)
    rest_y = (
        lower.position.y
        + lower.half_extents.y * lower.scale.sy
        + upper.half_extents.y * upper.scale.sy
    )
    move = Vec3(
        lower.position.x - upper.position.x,
        rest_y - upper.position.y if upper.position.y < rest_y else 0.0,
        lower.position.z - upper.position.z,
    )
    if move.norm() < 1e-12:
        return None
    return (move, 0.0)


def _region_delta(scene: Scene, spec: CultureSpec, target_id: str) -> tuple[Vec3, float] | None:
    if target_id != spec.participants[0]:
        return None
    assert spec.region is not None
    p = scene.get(target_id).position
    cx, cz = geom.closest_point_on_polygon(spec.region, (p.x, p.z))
    gx, gz = geom.centroid(spec.region)
    inward = (gx - cx, gz - cz)
    n = math.hypot(*inward)
    if n > 1e-12:
        cx += inward[0] / n * CORRECTION_MARGIN
        cz += inward[1] / n * CORRECTION_MARGIN
    return (Vec3(cx - p.x, 0.0, cz - p.z), 0.0)


def judge(
    scene: Scene,
    problem: PlacementProblem,
    *,
    epsilon: float = DEFAULT_EPSILON,
    target_id: str | None = None,
    support_height_frac: float = 0.01,
) -> Verdict:
    """Score a scene and explain every failing term.

    ``target_id`` scopes the suggested corrections: deltas are attached only
    to violations the target participates in, since those are the only poses
    a caller can change in response.
    """
    energy = total_energy(scene, problem)
    if energy.total <= epsilon:
        return Verdict(True, (), energy)

    tau = epsilon / max(problem.item_count(), 1)
    violations: list[Violation] = []

    def involves(*ids: str) -> bool:
        return target_id is not None and target_id in ids

    for (pair, area) in collision_items(scene, problem.collision_pairs, problem.clearance):
        if area <= tau:
            continue
        delta = _collision_delta(scene, pair, target_id, problem.clearance) if involves(*pair) else None
        violations.append(Violation(CODE_COLLISION, pair, area, delta))

    for rel, value in distance_items(scene, problem.relations):
        weighted = problem.distance_weight * value
        if weighted <= tau:
            continue
        rx, ry, rz = distance_residual(scene, rel)
        gap_limit = support_gap_threshold(scene, rel.related_id, support_height_frac)
        ids = (rel.subject_id, rel.related_id)
        delta = (Vec3(-rx, -ry, -rz), 0.0) if involves(rel.subject_id) else None
        if rel.is_support and ry > gap_limit:
            violations.append(
                Violation(
                    CODE_FLOATING,
                    ids,
                    ry,
                    (Vec3(0.0, -ry, 0.0), 0.0) if involves(rel.subject_id) else None,
                )
            )
        else:
            violations.append(Violation(CODE_DISTANCE, ids, math.sqrt(rx * rx + ry * ry + rz * rz), delta))

    for spec, value in affordance_items(scene, problem.affordances):
        if value <= tau:
            continue
        signed, _ = facing_error(scene, spec)
        delta = None
        if involves(spec.subject_id):
            if spec.mode == "face_same_direction":
                delta = (Vec3(0.0, 0.0, 0.0), -signed)
            else:
                delta = (
                    Vec3(0.0, 0.0, 0.0),
                    _face_yaw_delta(
                        scene, spec.subject_id, spec.related_id, away=spec.mode == "face_away"
                    ),
                )
        violations.append(
            Violation(CODE_ORIENTATION, (spec.subject_id, spec.related_id), value, delta)
        )

    def social_violation(spec: SocialSpec, value: float) -> Violation:
        ids = spec.participants
        delta: tuple[Vec3, float] | None = None
        if spec.kind == SIDE_OF:
            if involves(ids[0]):
                deficit = -side_margin(scene, spec) + CORRECTION_MARGIN
                ax, az = _side_axis(scene, spec)
                delta = (Vec3(ax * deficit, 0.0, az * deficit), 0.0)
            return Violation(CODE_SIDE, ids, value, delta)
        if spec.kind == IN_FRONT_OF:
            if involves(ids[0]):
                deficit = -front_halfspace_margin(scene, spec) + CORRECTION_MARGIN
                related = scene.get(ids[1])
                heading = math.radians(front_yaw(related))
                delta = (
                    Vec3(math.sin(heading) * deficit, 0.0, math.cos(heading) * deficit),
                    0.0,
                )
            return Violation(CODE_SIDE, ids, value, delta)
        if spec.kind == MUTUAL_FACING:
            if involves(*ids):
                other = ids[1] if target_id == ids[0] else ids[0]
                delta = (Vec3(0.0, 0.0, 0.0), _face_yaw_delta(scene, target_id, other))
            return Violation(CODE_ORIENTATION, ids, value, delta)
        if spec.kind in (ORDERED_ROW, EQUAL_SPACING):
            if involves(*ids):
                delta = _row_midpoint_delta(scene, spec, target_id)
            return Violation(CODE_ORDER, ids, value, delta)
        raise ValueError(f"unhandled social kind {spec.kind!r}")  # pragma: no cover

    for spec, value in social_items(scene, problem.social):
        if value <= tau:
            continue
        violations.append(social_violation(spec, value))

    for spec, value in culture_items(scene, problem.culture):
        if value <= tau:
            continue
        ids = spec.participants
        if spec.kind == STACK_ORDER:
            delta = _stack_delta(scene, spec, target_id) if involves(*ids) else None
            violations.append(Violation(CODE_STACKING, ids, value, delta))
        elif spec.kind == SYMMETRIC_PAIR:
            delta = None
            if involves(*ids):
                other = ids[1] if target_id == ids[0] else ids[0]
                goal = mirrored_point(spec, scene.get(other).position)
                delta = (goal - scene.get(target_id).position, 0.0)
            violations.append(Violation(CODE_REGION, ids, value, delta))
        elif spec.kind == REGION_PLACEMENT:
            delta = _region_delta(scene, spec, target_id) if involves(*ids) else None
            violations.append(Violation(CODE_REGION, ids, value, delta))
        else:
            violations.append(social_violation(spec, value))

    return Verdict(False, tuple(violations), energy)

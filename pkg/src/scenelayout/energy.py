"""Layered placement energy: collision, distance, affordance, social, culture.

Each term is non-negative and exactly zero when its constraints are satisfied,
so a fully satisfied arrangement has zero total energy. The declarative
constraint layer (:class:`ConstraintSpec`) compiles task descriptions into the
typed spec lists consumed by the evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from . import geom
from .scene import (
    ObjectInstance,
    Scene,
    SceneValidationError,
    Vec3,
    bearing_deg,
    front_yaw,
    rotate_vector,
    world_anchor,
    wrap_signed,
)

# --- facing modes -----------------------------------------------------------

FACE_TOWARD = "face_toward"
FACE_AWAY = "face_away"
FACE_SAME_DIRECTION = "face_same_direction"
FACING_MODES = frozenset({FACE_TOWARD, FACE_AWAY, FACE_SAME_DIRECTION})

# --- social / cultural relation kinds ---------------------------------------

SIDE_OF = "side_of"
IN_FRONT_OF = "in_front_of"
ORDERED_ROW = "ordered_row"
EQUAL_SPACING = "equal_spacing"
MUTUAL_FACING = "mutual_facing"
STACK_ORDER = "stack_order"
SYMMETRIC_PAIR = "symmetric_pair"
REGION_PLACEMENT = "region_placement"

SOCIAL_KINDS = frozenset({SIDE_OF, IN_FRONT_OF, ORDERED_ROW, EQUAL_SPACING, MUTUAL_FACING})
CULTURE_KINDS = SOCIAL_KINDS | {STACK_ORDER, SYMMETRIC_PAIR, REGION_PLACEMENT}

DEFAULT_FACING_TOLERANCE_DEG = 15.0
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class PairRelation:
    """Target relative displacement between two objects.

    ``target_offset`` is the desired ``subject - related`` position delta;
    components flagged in ``free`` are unconstrained. Support relations
    (subject rests on / inside related) are excluded from collision pairs.
    """

    subject_id: str
    related_id: str
    target_offset: Vec3
    free: tuple[bool, bool, bool] = (False, False, False)
    clearance: float = 0.0
    is_support: bool = False

    def __post_init__(self) -> None:
        if self.subject_id == self.related_id:
            raise SceneValidationError(f"relation ids must differ, got {self.subject_id!r} twice")
        if self.clearance < 0.0:
            raise SceneValidationError(f"relation clearance must be >= 0, got {self.clearance}")
        object.__setattr__(self, "free", tuple(bool(f) for f in self.free))
        if len(self.free) != 3:
            raise SceneValidationError("free flags must have three components")


@dataclass(frozen=True)
class AffordanceSpec:
    """Facing requirement: subject oriented relative to a related object."""

    subject_id: str
    related_id: str
    mode: str = FACE_TOWARD
    tolerance_deg: float = DEFAULT_FACING_TOLERANCE_DEG
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in FACING_MODES:
            raise SceneValidationError(f"unknown facing mode {self.mode!r}")
        if not (0.0 < self.tolerance_deg <= 180.0):
            raise SceneValidationError(f"tolerance_deg must be in (0, 180], got {self.tolerance_deg}")
        if self.weight <= 0.0:
            raise SceneValidationError(f"weight must be > 0, got {self.weight}")


@dataclass(frozen=True)
class SocialSpec:
    """Declarative inter-object arrangement rule.

    Kinds: ``side_of`` (side: left|right in the related object's frame, right
    being local +x), ``in_front_of`` (front half-space, optionally anchored),
    ``ordered_row`` (listed order along ``axis_deg`` plus gap-variance),
    ``equal_spacing`` (variance of adjacent center gaps in listed order) and
    ``mutual_facing`` (both participants face each other within tolerance).
    """

    kind: str
    participants: tuple[str, ...]
    weight: float = 1.0
    side: str | None = None
    anchor: str | None = None
    axis_deg: float | None = None
    tolerance_deg: float = DEFAULT_FACING_TOLERANCE_DEG
    max_gap: float | None = None

    _KINDS = SOCIAL_KINDS

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise SceneValidationError(f"unknown relation kind {self.kind!r}")
        object.__setattr__(self, "participants", tuple(self.participants))
        if self.weight <= 0.0:
            raise SceneValidationError(f"weight must be > 0, got {self.weight}")
        n = len(self.participants)
        if self.kind in (SIDE_OF, IN_FRONT_OF, MUTUAL_FACING) and n != 2:
            raise SceneValidationError(f"{self.kind} needs exactly 2 participants, got {n}")
        if self.kind in (ORDERED_ROW, EQUAL_SPACING) and n < 2:
            raise SceneValidationError(f"{self.kind} needs at least 2 participants, got {n}")
        if self.kind == SIDE_OF and self.side not in ("left", "right"):
            raise SceneValidationError(f"side_of needs side left|right, got {self.side!r}")
        if self.kind == ORDERED_ROW and self.axis_deg is None:
            raise SceneValidationError("ordered_row needs axis_deg")


@dataclass(frozen=True)
class CultureSpec(SocialSpec):
    """Arrangement rule with culture-specific kinds on top of the social ones.

    Adds ``stack_order`` (participants listed bottom to top; counts vertical
    inversions and horizontal center offsets beyond ``center_tolerance``),
    ``symmetric_pair`` (mirror-image residual about the axis through
    ``axis_point`` with heading ``axis_deg``) and ``region_placement``
    (distance of the participant's center outside ``region``).
    """

    center_tolerance: float = 0.02
    axis_point: tuple[float, float] = (0.0, 0.0)
    region: geom.ConvexPolygon | None = None

    _KINDS = CULTURE_KINDS

    def __post_init__(self) -> None:
        super().__post_init__()
        n = len(self.participants)
        if self.kind == STACK_ORDER and n < 2:
            raise SceneValidationError(f"stack_order needs at least 2 participants, got {n}")
        if self.kind == SYMMETRIC_PAIR:
            if n != 2:
                raise SceneValidationError(f"symmetric_pair needs exactly 2 participants, got {n}")
            if self.axis_deg is None:
                raise SceneValidationError("symmetric_pair needs axis_deg")
        if self.kind == REGION_PLACEMENT:
            if n != 1:
                raise SceneValidationError(f"region_placement needs exactly 1 participant, got {n}")
            if self.region is None or self.region.is_degenerate:
                raise SceneValidationError("region_placement needs a non-degenerate region")
        if self.center_tolerance < 0.0:
            raise SceneValidationError(f"center_tolerance must be >= 0, got {self.center_tolerance}")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-term energies plus their total (summed in fixed term order)."""

    collision: float = 0.0
    distance: float = 0.0
    affordance: float = 0.0
    social: float = 0.0
    culture: float = 0.0
    total: float = 0.0

    def __post_init__(self) -> None:
        for name in ("collision", "distance", "affordance", "social", "culture"):
            if getattr(self, name) < 0.0:
                raise SceneValidationError(f"negative energy term {name}")

    @classmethod
    def build(cls, collision: float, distance: float, affordance: float, social: float, culture: float) -> "EnergyBreakdown":
        total = collision + distance + affordance + social + culture
        return cls(collision, distance, affordance, social, culture, total)


@dataclass(frozen=True)
class PlacementProblem:
    """Everything the evaluators need: spec lists plus collision pairs.

    ``collision_pairs`` is explicit; support pairs are excluded when the
    problem is compiled (see :func:`collision_pairs_for`).
    """

    relations: tuple[PairRelation, ...] = ()
    affordances: tuple[AffordanceSpec, ...] = ()
    social: tuple[SocialSpec, ...] = ()
    culture: tuple[CultureSpec, ...] = ()
    collision_pairs: tuple[tuple[str, str], ...] = ()
    clearance: float = 0.0
    distance_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.clearance < 0.0:
            raise SceneValidationError(f"clearance must be >= 0, got {self.clearance}")
        if self.distance_weight <= 0.0:
            raise SceneValidationError(f"distance_weight must be > 0, got {self.distance_weight}")

    def item_count(self) -> int:
        return (
            len(self.collision_pairs)
            + len(self.relations)
            + len(self.affordances)
            + len(self.social)
            + len(self.culture)
        )

    def mentions(self, object_id: str) -> bool:
        """Whether any term can change when ``object_id`` moves."""
        for pair in self.collision_pairs:
            if object_id in pair:
                return True
        for rel in self.relations:
            if object_id in (rel.subject_id, rel.related_id):
                return True
        for aff in self.affordances:
            if object_id in (aff.subject_id, aff.related_id):
                return True
        for spec in self.social + self.culture:
            if object_id in spec.participants:
                return True
        return False


# --- geometric helpers shared by energy, judge and success predicates -------


def distance_residual(scene: Scene, rel: PairRelation) -> tuple[float, float, float]:
    """Masked residual (subject - related - target_offset); free components are 0."""
    delta = scene.get(rel.subject_id).position - scene.get(rel.related_id).position
    res = delta - rel.target_offset
    masked = tuple(0.0 if f else v for f, v in zip(rel.free, res.as_tuple()))
    return masked  # type: ignore[return-value]


def facing_error(scene: Scene, spec: AffordanceSpec) -> tuple[float, float]:
    """(signed misalignment deg, excess beyond tolerance, >= 0)."""
    subject = scene.get(spec.subject_id)
    related = scene.get(spec.related_id)
    if spec.mode == FACE_SAME_DIRECTION:
        target = front_yaw(related)
    else:
        d = related.position - subject.position
        if abs(d.x) < 1e-12 and abs(d.z) < 1e-12:
            return 0.0, 0.0  # coincident centers: direction undefined, treated as aligned
        target = bearing_deg(d.x, d.z)
        if spec.mode == FACE_AWAY:
            target += 180.0
    signed = wrap_signed(front_yaw(subject) - target)
    return signed, max(0.0, abs(signed) - spec.tolerance_deg)


def _local_frame_coords(related: ObjectInstance, point: Vec3) -> tuple[float, float]:
    """Ground-plane coordinates of a world point in ``related``'s local frame.

    Returns (right, forward) where right is local +x and forward local +z.
    Only yaw matters for the frame; the frame heading is the front heading.
    """
    heading = front_yaw(related)
    rad = math.radians(heading)
    c, s = math.cos(rad), math.sin(rad)
    dx = point.x - related.position.x
    dz = point.z - related.position.z
    # forward axis is (sin h, cos h); right axis is (cos h, -sin h)
    forward = dx * s + dz * c
    right = dx * c - dz * s
    return right, forward


def side_penetration(scene: Scene, spec: SocialSpec) -> float:
    """How far the subject sits on the wrong side of the related object's
    dividing plane (0 when on the requested side)."""
    subject, related = (scene.get(pid) for pid in spec.participants)
    right, _ = _local_frame_coords(related, subject.position)
    signed = right if spec.side == "right" else -right
    return max(0.0, -signed)


def side_margin(scene: Scene, spec: SocialSpec) -> float:
    """Signed distance onto the requested side (negative = wrong side)."""
    subject, related = (scene.get(pid) for pid in spec.participants)
    right, _ = _local_frame_coords(related, subject.position)
    return right if spec.side == "right" else -right


def front_halfspace_margin(scene: Scene, spec: SocialSpec) -> float:
    """Signed distance of the subject ahead of the related object's front plane.

    The plane passes through the related object's ``anchor`` (its center when
    no anchor is named) and is normal to the front direction.
    """
    subject, related = (scene.get(pid) for pid in spec.participants)
    origin = world_anchor(related, spec.anchor) if spec.anchor else related.position
    heading = math.radians(front_yaw(related))
    fx, fz = math.sin(heading), math.cos(heading)
    return (subject.position.x - origin.x) * fx + (subject.position.z - origin.z) * fz


def row_projections(scene: Scene, spec: SocialSpec) -> list[float]:
    rad = math.radians(spec.axis_deg if spec.axis_deg is not None else 90.0)
    ax, az = math.sin(rad), math.cos(rad)
    out = []
    for pid in spec.participants:
        p = scene.get(pid).position
        out.append(p.x * ax + p.z * az)
    return out


def adjacent_gaps(scene: Scene, spec: SocialSpec) -> list[float]:
    """Center-to-center distances between consecutive listed participants."""
    points = [scene.get(pid).position for pid in spec.participants]
    return [
        math.hypot(b.x - a.x, b.z - a.z)
        for a, b in zip(points, points[1:])
    ]


def gap_variance(gaps: Sequence[float]) -> float:
    if len(gaps) < 2:
        return 0.0
    mean = sum(gaps) / len(gaps)
    return sum((g - mean) ** 2 for g in gaps) / len(gaps)


def mutual_misalignments(scene: Scene, spec: SocialSpec) -> tuple[float, float]:
    """|misalignment| of each participant's front toward the other, degrees."""
    a, b = (scene.get(pid) for pid in spec.participants)
    out = []
    for subject, other in ((a, b), (b, a)):
        d = other.position - subject.position
        if abs(d.x) < 1e-12 and abs(d.z) < 1e-12:
            out.append(0.0)
            continue
        out.append(abs(wrap_signed(front_yaw(subject) - bearing_deg(d.x, d.z))))
    return out[0], out[1]


def stack_faults(scene: Scene, spec: CultureSpec) -> tuple[int, list[float]]:
    """(vertical order inversions, horizontal center offsets beyond tolerance)
    over consecutive bottom-to-top pairs."""
    objs = [scene.get(pid) for pid in spec.participants]
    inversions = 0
    offsets: list[float] = []
    for lower, upper in zip(objs, objs[1:]):
        if upper.position.y <= lower.position.y:
            inversions += 1
        horiz = math.hypot(
            upper.position.x - lower.position.x, upper.position.z - lower.position.z
        )
        offsets.append(max(0.0, horiz - spec.center_tolerance))
    return inversions, offsets


def mirrored_point(spec: CultureSpec, point: Vec3) -> Vec3:
    """Reflect a point across the vertical plane through ``axis_point`` with
    ground-plane heading ``axis_deg`` (y is preserved)."""
    rad = math.radians(spec.axis_deg or 0.0)
    ax, az = math.sin(rad), math.cos(rad)
    px, pz = spec.axis_point
    dx, dz = point.x - px, point.z - pz
    along = dx * ax + dz * az
    perp_x, perp_z = dx - along * ax, dz - along * az
    return Vec3(px + along * ax - perp_x, point.y, pz + along * az - perp_z)


def symmetry_residual(scene: Scene, spec: CultureSpec) -> float:
    a, b = (scene.get(pid) for pid in spec.participants)
    mirrored = mirrored_point(spec, a.position)
    return (mirrored - b.position).norm()


def region_distance(scene: Scene, spec: CultureSpec) -> float:
    p = scene.get(spec.participants[0]).position
    assert spec.region is not None
    return geom.distance_to_polygon(spec.region, (p.x, p.z))


# --- term evaluators ---------------------------------------------------------


def collision_items(
    scene: Scene, pairs: Iterable[tuple[str, str]], clearance: float = 0.0
) -> list[tuple[tuple[str, str], float]]:
    """Overlap area of each (dilated) footprint pair."""
    footprints: dict[str, geom.ConvexPolygon] = {}

    def fp(object_id: str) -> geom.ConvexPolygon:
        poly = footprints.get(object_id)
        if poly is None:
            poly = geom.footprint(scene.get(object_id))
            if clearance > 0.0:
                poly = geom.dilate(poly, clearance)
            footprints[object_id] = poly
        return poly

    out = []
    for a, b in pairs:
        out.append(((a, b), geom.intersection_area(fp(a), fp(b))))
    return out


def collision_energy(scene: Scene, pairs: Iterable[tuple[str, str]], clearance: float = 0.0) -> float:
    return sum(area for _, area in collision_items(scene, pairs, clearance))


def distance_items(scene: Scene, relations: Iterable[PairRelation]) -> list[tuple[PairRelation, float]]:
    out = []
    for rel in relations:
        rx, ry, rz = distance_residual(scene, rel)
        out.append((rel, rx * rx + ry * ry + rz * rz))
    return out


def distance_energy(scene: Scene, relations: Iterable[PairRelation], weight: float = 1.0) -> float:
    return weight * sum(v for _, v in distance_items(scene, relations))


def affordance_items(scene: Scene, specs: Iterable[AffordanceSpec]) -> list[tuple[AffordanceSpec, float]]:
    out = []
    for spec in specs:
        _, excess = facing_error(scene, spec)
        out.append((spec, spec.weight * excess))
    return out


def affordance_energy(scene: Scene, specs: Iterable[AffordanceSpec]) -> float:
    return sum(v for _, v in affordance_items(scene, specs))


def _social_value(scene: Scene, spec: SocialSpec) -> float:
    if spec.kind == SIDE_OF:
        return spec.weight * side_penetration(scene, spec)
    if spec.kind == IN_FRONT_OF:
        return spec.weight * max(0.0, -front_halfspace_margin(scene, spec))
    if spec.kind == EQUAL_SPACING:
        return spec.weight * gap_variance(adjacent_gaps(scene, spec))
    if spec.kind == ORDERED_ROW:
        proj = row_projections(scene, spec)
        inversion = sum(max(0.0, a - b) for a, b in zip(proj, proj[1:]))
        return spec.weight * (inversion + gap_variance(adjacent_gaps(scene, spec)))
    if spec.kind == MUTUAL_FACING:
        mis_a, mis_b = mutual_misalignments(scene, spec)
        tol = spec.tolerance_deg
        return spec.weight * (max(0.0, mis_a - tol) + max(0.0, mis_b - tol))
    raise SceneValidationError(f"unhandled social kind {spec.kind!r}")


def _culture_value(scene: Scene, spec: CultureSpec) -> float:
    if spec.kind == STACK_ORDER:
        inversions, offsets = stack_faults(scene, spec)
        return spec.weight * (inversions + sum(offsets))
    if spec.kind == SYMMETRIC_PAIR:
        return spec.weight * symmetry_residual(scene, spec)
    if spec.kind == REGION_PLACEMENT:
        return spec.weight * region_distance(scene, spec)
    return _social_value(scene, spec)


def social_items(scene: Scene, specs: Iterable[SocialSpec]) -> list[tuple[SocialSpec, float]]:
    return [(spec, _social_value(scene, spec)) for spec in specs]


def social_energy(scene: Scene, specs: Iterable[SocialSpec]) -> float:
    return sum(v for _, v in social_items(scene, specs))


def culture_items(scene: Scene, specs: Iterable[CultureSpec]) -> list[tuple[CultureSpec, float]]:
    return [(spec, _culture_value(scene, spec)) for spec in specs]


def culture_energy(scene: Scene, specs: Iterable[CultureSpec]) -> float:
    return sum(v for _, v in culture_items(scene, specs))


def total_energy(scene: Scene, problem: PlacementProblem) -> EnergyBreakdown:
    """Evaluate every term of the problem against a scene."""
    return EnergyBreakdown.build(
        collision_energy(scene, problem.collision_pairs, problem.clearance),
        distance_energy(scene, problem.relations, problem.distance_weight),
        affordance_energy(scene, problem.affordances),
        social_energy(scene, problem.social),
        culture_energy(scene, problem.culture),
    )


# --- declarative constraints -------------------------------------------------

ON = "on"
INSIDE = "inside"
NEXT_TO = "next_to"
AT_OFFSET = "at_offset"
ROW = "row"
STACK = "stack"

CONSTRAINT_KINDS = frozenset(
    {
        ON,
        INSIDE,
        NEXT_TO,
        AT_OFFSET,
        FACE_TOWARD,
        FACE_AWAY,
        FACE_SAME_DIRECTION,
        SIDE_OF,
        IN_FRONT_OF,
        ROW,
        EQUAL_SPACING,
        MUTUAL_FACING,
        STACK,
        SYMMETRIC_PAIR,
    }
)

GROUND_TAG = "ground"
DEFAULT_NEXT_TO_FACTOR = 1.5


@dataclass(frozen=True)
class ConstraintSpec:
    """One declarative relation from a task file.

    Kinds and their extra fields:

      on           subject rests on related's top (anchor, default top_surface)
      inside       subject within related's interior region (anchor + radius)
      next_to      subject within max_distance of related's footprint
      at_offset    subject at ``offset`` in related's local frame (free flags)
      face_toward / face_away / face_same_direction   (tolerance_deg, weight)
      side_of      side left|right in related's frame
      in_front_of  ahead of related's front plane (anchor optional)
      row          participants ordered along axis_deg
      equal_spacing  equal adjacent gaps (max_gap checked by the predicate)
      mutual_facing  both face each other (tolerance_deg)
      stack        participants bottom to top (center_tolerance)
      symmetric_pair  mirrored about axis_object's center axis
    """

    kind: str
    subject: str | None = None
    related: str | None = None
    participants: tuple[str, ...] = ()
    anchor: str | None = None
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    free: tuple[bool, bool, bool] | None = None
    side: str | None = None
    axis_deg: float | None = None
    axis_object: str | None = None
    radius: float | None = None
    vertical_band: float | None = None
    max_distance: float | None = None
    max_gap: float | None = None
    standing_y: float | None = None
    tolerance_deg: float = DEFAULT_FACING_TOLERANCE_DEG
    center_tolerance: float = 0.02
    offset_tolerance: float = 0.05
    symmetry_tolerance: float = 0.05
    weight: float = 1.0
    clearance: float = 0.0
    bucket: str | None = None
    is_support: bool = False

    def __post_init__(self) -> None:
        if self.kind not in CONSTRAINT_KINDS:
            raise SceneValidationError(f"unknown constraint kind {self.kind!r}")
        object.__setattr__(self, "participants", tuple(self.participants))
        if self.bucket not in (None, "social", "culture"):
            raise SceneValidationError(f"bucket must be social|culture, got {self.bucket!r}")

    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any]) -> "ConstraintSpec":
        data = dict(doc)
        kind = data.pop("kind", None)
        if kind is True:
            kind = ON  # YAML 1.1 reads a bare `on` as boolean true
        if kind is None:
            raise SceneValidationError(f"constraint record missing kind: {doc!r}")
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416 - field names
        unknown = set(data) - known
        if unknown:
            raise SceneValidationError(f"unknown constraint fields {sorted(unknown)} in {doc!r}")
        if "offset" in data:
            data["offset"] = tuple(float(v) for v in data["offset"])
        if "free" in data and data["free"] is not None:
            data["free"] = tuple(bool(v) for v in data["free"])
        if "participants" in data and data["participants"] is not None:
            data["participants"] = tuple(str(p) for p in data["participants"])
        return cls(kind=str(kind), **data)

    def referenced_ids(self) -> tuple[str, ...]:
        ids = [i for i in (self.subject, self.related, self.axis_object) if i]
        ids.extend(self.participants)
        return tuple(dict.fromkeys(ids))


def _require(scene: Scene, object_id: str | None, constraint: ConstraintSpec) -> ObjectInstance:
    if not object_id:
        raise SceneValidationError(f"constraint {constraint.kind!r} is missing an object id")
    return scene.get(object_id)


def resting_offset(related: ObjectInstance, anchor: str | None) -> Vec3:
    """World-space offset from the related object's center to its resting surface."""
    name = anchor or "top_surface"
    if name in related.anchors:
        return rotate_vector(related.orientation, related.scale.apply(related.anchors[name]))
    # no declared anchor: use the top face center of the upright box
    return rotate_vector(
        related.orientation,
        related.scale.apply(Vec3(0.0, related.half_extents.y, 0.0)),
    )


def _half_height(obj: ObjectInstance) -> float:
    return obj.half_extents.y * obj.scale.sy


def support_gap_threshold(scene: Scene, related_id: str, fraction: float = 0.01) -> float:
    """Resting tolerance: ``fraction`` of the supporting object's world height."""
    related = scene.get(related_id)
    return fraction * 2.0 * _half_height(related)


def _compile_one(
    scene: Scene,
    c: ConstraintSpec,
    relations: list[PairRelation],
    affordances: list[AffordanceSpec],
    social: list[SocialSpec],
    culture: list[CultureSpec],
    next_to_factor: float,
) -> None:
    def push_social_or_culture(spec_kwargs: dict[str, Any], *, default_bucket: str = "social") -> None:
        bucket = c.bucket or default_bucket
        if bucket == "culture":
            culture.append(CultureSpec(**spec_kwargs))
        else:
            social.append(SocialSpec(**spec_kwargs))

    if c.kind == ON:
        subject = _require(scene, c.subject, c)
        related = _require(scene, c.related, c)
        rest = resting_offset(related, c.anchor)
        dy = rest.y + _half_height(subject)
        relations.append(
            PairRelation(
                subject.id, related.id, Vec3(0.0, dy, 0.0),
                free=(True, False, True), clearance=c.clearance, is_support=True,
            )
        )
        culture.append(
            CultureSpec(
                kind=REGION_PLACEMENT,
                participants=(subject.id,),
                weight=c.weight,
                region=geom.footprint(related),
            )
        )
    elif c.kind == INSIDE:
        subject = _require(scene, c.subject, c)
        related = _require(scene, c.related, c)
        spot = resting_offset(related, c.anchor or "top_surface") if c.anchor else Vec3(0.0, 0.0, 0.0)
        relations.append(
            PairRelation(
                subject.id, related.id, Vec3(0.0, spot.y, 0.0),
                free=(True, False, True), clearance=c.clearance, is_support=True,
            )
        )
        radius = c.radius if c.radius is not None else min(
            related.half_extents.x * related.scale.sx, related.half_extents.z * related.scale.sz
        )
        center = (related.position.x + spot.x, related.position.z + spot.z)
        culture.append(
            CultureSpec(
                kind=REGION_PLACEMENT,
                participants=(subject.id,),
                weight=c.weight,
                region=geom.disk_polygon(radius, center=center),
            )
        )
    elif c.kind == NEXT_TO:
        subject = _require(scene, c.subject, c)
        related = _require(scene, c.related, c)
        if c.max_distance is not None:
            d_max = c.max_distance
        else:
            _, r_subject = geom.bounding_circle(geom.footprint(subject))
            _, r_related = geom.bounding_circle(geom.footprint(related))
            d_max = next_to_factor * (r_subject + r_related)
        culture.append(
            CultureSpec(
                kind=REGION_PLACEMENT,
                participants=(subject.id,),
                weight=c.weight,
                region=geom.dilate(geom.footprint(related), d_max),
            )
        )
        if c.standing_y is not None:
            relations.append(
                PairRelation(
                    subject.id, related.id,
                    Vec3(0.0, c.standing_y - related.position.y, 0.0),
                    free=(True, False, True), clearance=c.clearance,
                )
            )
    elif c.kind == AT_OFFSET:
        subject = _require(scene, c.subject, c)
        related = _require(scene, c.related, c)
        world = rotate_vector(related.orientation, related.scale.apply(Vec3.of(c.offset)))
        free = c.free if c.free is not None else (False, False, False)
        relations.append(
            PairRelation(
                subject.id, related.id, world,
                free=free, clearance=c.clearance, is_support=c.is_support,
            )
        )
    elif c.kind in FACING_MODES:
        subject = _require(scene, c.subject, c)
        related = _require(scene, c.related, c)
        affordances.append(
            AffordanceSpec(subject.id, related.id, c.kind, c.tolerance_deg, c.weight)
        )
    elif c.kind == SIDE_OF:
        subject = _require(scene, c.subject, c)
        related = _require(scene, c.related, c)
        push_social_or_culture(
            dict(kind=SIDE_OF, participants=(subject.id, related.id), weight=c.weight, side=c.side)
        )
    elif c.kind == IN_FRONT_OF:
        subject = _require(scene, c.subject, c)
        related = _require(scene, c.related, c)
        push_social_or_culture(
            dict(kind=IN_FRONT_OF, participants=(subject.id, related.id), weight=c.weight, anchor=c.anchor)
        )
    elif c.kind == ROW:
        for pid in c.participants:
            _require(scene, pid, c)
        push_social_or_culture(
            dict(kind=ORDERED_ROW, participants=c.participants, weight=c.weight, axis_deg=c.axis_deg)
        )
    elif c.kind == EQUAL_SPACING:
        for pid in c.participants:
            _require(scene, pid, c)
        push_social_or_culture(
            dict(kind=EQUAL_SPACING, participants=c.participants, weight=c.weight, max_gap=c.max_gap)
        )
    elif c.kind == MUTUAL_FACING:
        for pid in c.participants:
            _require(scene, pid, c)
        push_social_or_culture(
            dict(
                kind=MUTUAL_FACING, participants=c.participants, weight=c.weight,
                tolerance_deg=c.tolerance_deg,
            )
        )
    elif c.kind == STACK:
        for pid in c.participants:
            _require(scene, pid, c)
        culture.append(
            CultureSpec(
                kind=STACK_ORDER, participants=c.participants, weight=c.weight,
                center_tolerance=c.center_tolerance,
            )
        )
    elif c.kind == SYMMETRIC_PAIR:
        for pid in c.participants:
            _require(scene, pid, c)
        axis_obj = _require(scene, c.axis_object, c)
        culture.append(
            CultureSpec(
                kind=SYMMETRIC_PAIR, participants=c.participants, weight=c.weight,
                axis_deg=front_yaw(axis_obj),
                axis_point=(axis_obj.position.x, axis_obj.position.z),
            )
        )
    else:  # pragma: no cover - CONSTRAINT_KINDS is the single source of truth
        raise SceneValidationError(f"unhandled constraint kind {c.kind!r}")


def support_closure(constraints: Iterable[ConstraintSpec]) -> frozenset[frozenset[str]]:
    """Unordered pairs connected through declared support (on/inside) chains."""
    above: dict[str, set[str]] = {}
    for c in constraints:
        if c.kind in (ON, INSIDE) or (c.kind == AT_OFFSET and c.is_support):
            if c.subject and c.related:
                above.setdefault(c.subject, set()).add(c.related)
    pairs: set[frozenset[str]] = set()
    for start in above:
        stack = list(above[start])
        seen: set[str] = set()
        while stack:
            below = stack.pop()
            if below in seen:
                continue
            seen.add(below)
            pairs.add(frozenset((start, below)))
            stack.extend(above.get(below, ()))
    return frozenset(pairs)


def collision_pairs_for(
    scene: Scene,
    constraints: Iterable[ConstraintSpec],
    *,
    include_ids: Iterable[str] | None = None,
) -> tuple[tuple[str, str], ...]:
    """All unordered object pairs that must stay overlap-free.

    Ground-tagged objects never collide (everything legitimately sits on
    them) and pairs linked by a support chain are excluded.
    """
    constraints = tuple(constraints)
    if include_ids is None:
        ids = [
            obj.id
            for obj in scene.objects
            if GROUND_TAG not in scene.asset(obj.asset_id).tags
        ]
    else:
        ids = [i for i in include_ids]
    excluded = support_closure(constraints)
    pairs = []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            if frozenset((a, b)) not in excluded:
                pairs.append((a, b))
    return tuple(pairs)


def compile_constraints(
    scene: Scene,
    constraints: Iterable[ConstraintSpec],
    *,
    clearance: float = 0.0,
    distance_weight: float = 1.0,
    next_to_factor: float = DEFAULT_NEXT_TO_FACTOR,
) -> PlacementProblem:
    """Compile declarative constraints into a placement problem.

    Target offsets, regions and symmetry axes are captured against the given
    scene, so compile against the scene the constraints will be judged in.
    """
    constraints = tuple(constraints)
    relations: list[PairRelation] = []
    affordances: list[AffordanceSpec] = []
    social: list[SocialSpec] = []
    culture: list[CultureSpec] = []
    for c in constraints:
        _compile_one(scene, c, relations, affordances, social, culture, next_to_factor)
    effective_clearance = max([clearance] + [r.clearance for r in relations]) if relations else clearance
    return PlacementProblem(
        relations=tuple(relations),
        affordances=tuple(affordances),
        social=tuple(social),
        culture=tuple(culture),
        collision_pairs=collision_pairs_for(scene, constraints),
        clearance=effective_clearance,
        distance_weight=distance_weight,
    )

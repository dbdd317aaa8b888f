"""Scene model: oriented-box objects with named anchors, backed by an asset catalog.

Conventions used throughout the package:

  * units are meters and degrees; every real is a binary64 float
  * y is up and the ground plane is (x, z)
  * yaw rotates about +y and takes +z toward +x; pitch rotates about +x,
    roll about +z; rotation order is roll, then pitch, then yaw
  * an object's local front is its ``front_axis``, +z unless the asset
    says otherwise
  * scenes are immutable values; editing produces a new ``Scene``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping


class UnknownObjectError(KeyError):
    """An object id does not resolve within the scene."""


class UnknownAssetError(KeyError):
    """An asset id does not resolve within the catalog."""


class UnknownAnchorError(KeyError):
    """An anchor name is missing from an object."""


class SceneValidationError(ValueError):
    """A scene or object violates a structural invariant."""


def wrap_yaw(deg: float) -> float:
    """Normalize an angle to [0, 360)."""
    w = deg % 360.0
    # A tiny negative input rounds up to exactly 360.0 under float modulo.
    return w if w < 360.0 else 0.0


def wrap_signed(deg: float) -> float:
    """Normalize an angle to [-180, 180)."""
    w = (deg + 180.0) % 360.0 - 180.0
    return w if w < 180.0 else -180.0


def bearing_deg(dx: float, dz: float) -> float:
    """Heading of the ground-plane vector (dx, dz) in degrees, [-180, 180).

    0 points along +z and +90 along +x, matching the yaw convention.
    """
    return wrap_signed(math.degrees(math.atan2(dx, dz)))


def format_real(x: float) -> str:
    """Serialize a real with full round-trip fidelity.

    Uses a fixed nine-decimal form whenever that is exact and falls back to
    ``repr`` (shortest round-trip) otherwise, so files stay human-readable
    without ever losing bits.
    """
    fixed = f"{x:.9f}"
    return fixed if float(fixed) == x else repr(x)


@dataclass(frozen=True, slots=True)
class Vec3:
    """A 3D vector / point in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise SceneValidationError(f"non-finite component {name}={value!r}")
            object.__setattr__(self, name, value)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def hadamard(self, other: "Vec3") -> "Vec3":
        """Component-wise product."""
        return Vec3(self.x * other.x, self.y * other.y, self.z * other.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @staticmethod
    def of(values: Iterable[float]) -> "Vec3":
        vx, vy, vz = values
        return Vec3(float(vx), float(vy), float(vz))


_ZERO = Vec3(0.0, 0.0, 0.0)
_UNIT_SCALE = Vec3(1.0, 1.0, 1.0)
_FRONT_Z = Vec3(0.0, 0.0, 1.0)


@dataclass(frozen=True, slots=True)
class Orientation:
    """Yaw/pitch/roll in degrees, normalized on construction.

    Yaw lives in [0, 360); pitch and roll in [-180, 180).
    """

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self) -> None:
        for name in ("yaw", "pitch", "roll"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise SceneValidationError(f"non-finite angle {name}={value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "yaw", wrap_yaw(self.yaw))
        object.__setattr__(self, "pitch", wrap_signed(self.pitch))
        object.__setattr__(self, "roll", wrap_signed(self.roll))

    def rotation_rows(self) -> tuple[tuple[float, float, float], ...]:
        """Rows of the world-from-local rotation matrix (Ry @ Rx @ Rz)."""
        cy, sy = _cos_sin(self.yaw)
        cx, sx = _cos_sin(self.pitch)
        cz, sz = _cos_sin(self.roll)
        ry = ((cy, 0.0, sy), (0.0, 1.0, 0.0), (-sy, 0.0, cy))
        rx = ((1.0, 0.0, 0.0), (0.0, cx, -sx), (0.0, sx, cx))
        rz = ((cz, -sz, 0.0), (sz, cz, 0.0), (0.0, 0.0, 1.0))
        return _matmul3(_matmul3(ry, rx), rz)


def _cos_sin(deg: float) -> tuple[float, float]:
    rad = math.radians(deg)
    return math.cos(rad), math.sin(rad)


def _matmul3(a, b):
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3))
        for i in range(3)
    )


def rotate_vector(orientation: Orientation, v: Vec3) -> Vec3:
    r = orientation.rotation_rows()
    return Vec3(
        r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
        r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
        r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
    )


@dataclass(frozen=True, slots=True)
class ScaleVec:
    """Per-axis positive scale factors."""

    sx: float = 1.0
    sy: float = 1.0
    sz: float = 1.0

    def __post_init__(self) -> None:
        for name in ("sx", "sy", "sz"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0.0):
                raise SceneValidationError(f"scale {name}={value!r} must be > 0")
            object.__setattr__(self, name, value)

    def apply(self, v: Vec3) -> Vec3:
        return Vec3(v.x * self.sx, v.y * self.sy, v.z * self.sz)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.sx, self.sy, self.sz)


@dataclass(frozen=True, slots=True)
class Aabb:
    """Axis-aligned box given by its min/max corners."""

    min: Vec3
    max: Vec3

    def __post_init__(self) -> None:
        if self.min.x > self.max.x or self.min.y > self.max.y or self.min.z > self.max.z:
            raise SceneValidationError(f"inverted aabb {self.min} > {self.max}")

    @property
    def center(self) -> Vec3:
        return Vec3(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
            (self.min.z + self.max.z) / 2.0,
        )

    @property
    def size(self) -> Vec3:
        return self.max - self.min


def _validated_half_extents(he: Vec3) -> Vec3:
    if he.x <= 0.0 or he.y <= 0.0 or he.z <= 0.0:
        raise SceneValidationError(f"half extents must be positive, got {he}")
    return he


def _validated_front_axis(axis: Vec3) -> Vec3:
    norm = axis.norm()
    if abs(norm - 1.0) > 1e-6:
        raise SceneValidationError(f"front_axis must be unit length, got |{axis}| = {norm}")
    if norm == 1.0:
        return axis
    return Vec3(axis.x / norm, axis.y / norm, axis.z / norm)


def _anchor_map(anchors: Mapping[str, Vec3] | None) -> dict[str, Vec3]:
    out: dict[str, Vec3] = {}
    for name, value in (anchors or {}).items():
        if not name:
            raise SceneValidationError("anchor names must be non-empty")
        out[str(name)] = value if isinstance(value, Vec3) else Vec3.of(value)
    return out


@dataclass(frozen=True)
class AssetSpec:
    """Catalog record describing one placeable asset."""

    asset_id: str
    half_extents: Vec3
    front_axis: Vec3 = _FRONT_Z
    anchors: Mapping[str, Vec3] = field(default_factory=dict)
    tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.asset_id:
            raise SceneValidationError("asset_id must be non-empty")
        object.__setattr__(self, "half_extents", _validated_half_extents(self.half_extents))
        object.__setattr__(self, "front_axis", _validated_front_axis(self.front_axis))
        object.__setattr__(self, "anchors", _anchor_map(self.anchors))
        object.__setattr__(self, "tags", tuple(str(t) for t in self.tags))


@dataclass(frozen=True)
class ObjectInstance:
    """A placed object: box geometry plus pose.

    Geometry fields (half extents, front axis, anchors) are copied from the
    catalog at instantiation time and may be overridden per object.
    """

    id: str
    asset_id: str
    position: Vec3 = _ZERO
    orientation: Orientation = Orientation()
    scale: ScaleVec = ScaleVec()
    half_extents: Vec3 = Vec3(0.5, 0.5, 0.5)
    front_axis: Vec3 = _FRONT_Z
    anchors: Mapping[str, Vec3] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise SceneValidationError("object id must be non-empty")
        if not self.asset_id:
            raise SceneValidationError(f"object {self.id!r} has an empty asset_id")
        object.__setattr__(self, "half_extents", _validated_half_extents(self.half_extents))
        object.__setattr__(self, "front_axis", _validated_front_axis(self.front_axis))
        object.__setattr__(self, "anchors", _anchor_map(self.anchors))

    def moved_to(self, position: Vec3) -> "ObjectInstance":
        return _replace_pose(self, position, self.orientation)

    def rotated_to(self, orientation: Orientation) -> "ObjectInstance":
        return _replace_pose(self, self.position, orientation)

    def with_pose(self, position: Vec3, orientation: Orientation) -> "ObjectInstance":
        return _replace_pose(self, position, orientation)


def _replace_pose(obj: ObjectInstance, position: Vec3, orientation: Orientation) -> ObjectInstance:
    clone = object.__new__(ObjectInstance)
    for name in ("id", "asset_id", "scale", "half_extents", "front_axis", "anchors"):
        object.__setattr__(clone, name, getattr(obj, name))
    object.__setattr__(clone, "position", position)
    object.__setattr__(clone, "orientation", orientation)
    return clone


def instantiate(
    asset: AssetSpec,
    object_id: str,
    position: Vec3 = _ZERO,
    orientation: Orientation = Orientation(),
    scale: ScaleVec = ScaleVec(),
) -> ObjectInstance:
    """Create an object from a catalog asset."""
    return ObjectInstance(
        id=object_id,
        asset_id=asset.asset_id,
        position=position,
        orientation=orientation,
        scale=scale,
        half_extents=asset.half_extents,
        front_axis=asset.front_axis,
        anchors=dict(asset.anchors),
    )


# Corner k uses sign bits (k&4 -> x, k&2 -> y, k&1 -> z); bit set means +.
_CORNER_SIGNS = tuple(
    (1.0 if k & 4 else -1.0, 1.0 if k & 2 else -1.0, 1.0 if k & 1 else -1.0)
    for k in range(8)
)


def local_to_world(obj: ObjectInstance, local: Vec3) -> Vec3:
    """Map a point from the object's local frame to world coordinates."""
    return obj.position + rotate_vector(obj.orientation, obj.scale.apply(local))


def world_corners(obj: ObjectInstance) -> tuple[Vec3, ...]:
    """The 8 box corners in world space.

    Corner k has local sign pattern (k&4 -> x, k&2 -> y, k&1 -> z) with a set
    bit meaning the positive face.
    """
    he = obj.half_extents
    r = obj.orientation.rotation_rows()
    s = obj.scale
    px, py, pz = obj.position.as_tuple()
    out = []
    for gx, gy, gz in _CORNER_SIGNS:
        lx, ly, lz = gx * he.x * s.sx, gy * he.y * s.sy, gz * he.z * s.sz
        out.append(
            Vec3(
                px + r[0][0] * lx + r[0][1] * ly + r[0][2] * lz,
                py + r[1][0] * lx + r[1][1] * ly + r[1][2] * lz,
                pz + r[2][0] * lx + r[2][1] * ly + r[2][2] * lz,
            )
        )
    return tuple(out)


def world_aabb(obj: ObjectInstance) -> Aabb:
    """Tight axis-aligned bounds of the oriented box."""
    corners = world_corners(obj)
    xs = [c.x for c in corners]
    ys = [c.y for c in corners]
    zs = [c.z for c in corners]
    return Aabb(Vec3(min(xs), min(ys), min(zs)), Vec3(max(xs), max(ys), max(zs)))


def world_anchor(obj: ObjectInstance, name: str) -> Vec3:
    """World position of a named anchor."""
    try:
        local = obj.anchors[name]
    except KeyError:
        raise UnknownAnchorError(f"object {obj.id!r} has no anchor {name!r}") from None
    return local_to_world(obj, local)


def world_front_direction(obj: ObjectInstance) -> Vec3:
    return rotate_vector(obj.orientation, obj.front_axis)


def front_yaw(obj: ObjectInstance) -> float:
    """Heading of the object's front direction projected onto the ground plane.

    Degenerate (straight up/down) fronts project to the zero vector; the
    heading is then defined as 0.
    """
    d = world_front_direction(obj)
    if abs(d.x) < 1e-12 and abs(d.z) < 1e-12:
        return 0.0
    return bearing_deg(d.x, d.z)


@dataclass(frozen=True)
class Scene:
    """An immutable snapshot: placed objects plus the asset catalog."""

    objects: tuple[ObjectInstance, ...] = ()
    catalog: tuple[AssetSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "catalog", tuple(self.catalog))
        seen: set[str] = set()
        for obj in self.objects:
            if obj.id in seen:
                raise SceneValidationError(f"duplicate object id {obj.id!r}")
            seen.add(obj.id)
        asset_ids = {a.asset_id for a in self.catalog}
        if len(asset_ids) != len(self.catalog):
            raise SceneValidationError("duplicate asset ids in catalog")
        for obj in self.objects:
            if obj.asset_id not in asset_ids:
                raise SceneValidationError(
                    f"object {obj.id!r} references unknown asset {obj.asset_id!r}"
                )

    @cached_property
    def _index(self) -> dict[str, int]:
        return {obj.id: i for i, obj in enumerate(self.objects)}

    @cached_property
    def _assets(self) -> dict[str, AssetSpec]:
        return {a.asset_id: a for a in self.catalog}

    def __iter__(self) -> Iterator[ObjectInstance]:
        return iter(self.objects)

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._index

    def object_ids(self) -> tuple[str, ...]:
        return tuple(obj.id for obj in self.objects)

    def index_of(self, object_id: str) -> int:
        try:
            return self._index[object_id]
        except KeyError:
            raise UnknownObjectError(f"no object {object_id!r} in scene") from None

    def get(self, object_id: str) -> ObjectInstance:
        return self.objects[self.index_of(object_id)]

    def asset(self, asset_id: str) -> AssetSpec:
        try:
            return self._assets[asset_id]
        except KeyError:
            raise UnknownAssetError(f"no asset {asset_id!r} in catalog") from None

    def tags_of(self, object_id: str) -> tuple[str, ...]:
        return self.asset(self.get(object_id).asset_id).tags

    def with_object(self, updated: ObjectInstance) -> "Scene":
        """Replace the object with the same id."""
        i = self.index_of(updated.id)
        objects = self.objects[:i] + (updated,) + self.objects[i + 1 :]
        return Scene(objects, self.catalog)

    def add_object(self, obj: ObjectInstance) -> "Scene":
        if obj.id in self._index:
            raise SceneValidationError(f"object id {obj.id!r} already in scene")
        return Scene(self.objects + (obj,), self.catalog)

    def spawn(
        self,
        asset_id: str,
        object_id: str,
        position: Vec3 = _ZERO,
        orientation: Orientation = Orientation(),
        scale: ScaleVec = ScaleVec(),
    ) -> "Scene":
        """Add a new object instantiated from the catalog."""
        return self.add_object(instantiate(self.asset(asset_id), object_id, position, orientation, scale))

    @staticmethod
    def from_objects(*objects: ObjectInstance) -> "Scene":
        """Build a scene synthesizing catalog entries from the objects themselves.

        Convenience for tests and ad-hoc scenes.
        """
        catalog: dict[str, AssetSpec] = {}
        for obj in objects:
            catalog.setdefault(
                obj.asset_id,
                AssetSpec(
                    asset_id=obj.asset_id,
                    half_extents=obj.half_extents,
                    front_axis=obj.front_axis,
                    anchors=dict(obj.anchors),
                ),
            )
        return Scene(tuple(objects), tuple(catalog.values()))


def _fmt_vec(v: Vec3) -> str:
    return f"({format_real(v.x)},{format_real(v.y)},{format_real(v.z)})"


def scene_snapshot_text(scene: Scene) -> str:
    """Deterministic text listing of catalog assets and placed objects.

    One record per object: id, asset, position, yaw and world-space bounds.
    The output is a pure function of the scene value, suitable for prompts
    and for golden-file comparison.
    """
    lines = [
        "assets: " + (",".join(a.asset_id for a in scene.catalog) or "(none)"),
        f"objects: {len(scene.objects)}",
    ]
    for obj in scene.objects:
        box = world_aabb(obj)
        lines.append(
            f"id={obj.id} asset={obj.asset_id} pos={_fmt_vec(obj.position)} "
            f"yaw={format_real(obj.orientation.yaw)} "
            f"aabb_min={_fmt_vec(box.min)} aabb_max={_fmt_vec(box.max)}"
        )
    return "\n".join(lines) + "\n"

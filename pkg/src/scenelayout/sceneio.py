"""Scene and catalog files: one human-editable YAML document per scene.

Schema (see README for the full field reference):

    assets:                      # inline catalog, or `catalog: <path>` instead
      - asset_id: table
        half_extents: [0.8, 0.375, 0.5]
        front_axis: [0.0, 0.0, 1.0]      # optional, default +z
        anchors: {top_surface: [0.0, 0.375, 0.0]}
        tags: [furniture]
    objects:
      - id: table
        asset_id: table
        position: [0.0, 0.375, 0.0]
        yaw: 0.0                         # or orientation: {yaw, pitch, roll}
        scale: [1.0, 1.0, 1.0]           # optional

Reals are written with at least nine decimals in fixed form whenever that is
exact, falling back to shortest round-trip notation, so load(save(scene))
reproduces every field bit for bit.
"""

from __future__ import annotations

import os
from typing import Any, Mapping

import yaml

from .scene import (
    AssetSpec,
    ObjectInstance,
    Orientation,
    ScaleVec,
    Scene,
    SceneValidationError,
    Vec3,
    format_real,
)


class _RealDumper(yaml.SafeDumper):
    """SafeDumper writing floats through :func:`format_real`."""


def _represent_float(dumper: yaml.Dumper, value: float) -> yaml.ScalarNode:
    return dumper.represent_scalar("tag:yaml.org,2002:float", format_real(value))


_RealDumper.add_representer(float, _represent_float)


def dump_yaml(doc: Any) -> str:
    """Deterministic YAML text for a plain document tree."""
    return yaml.dump(doc, Dumper=_RealDumper, sort_keys=False, default_flow_style=None)


def load_yaml(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def _vec_list(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def asset_to_dict(asset: AssetSpec) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "asset_id": asset.asset_id,
        "half_extents": _vec_list(asset.half_extents),
    }
    if asset.front_axis != Vec3(0.0, 0.0, 1.0):
        doc["front_axis"] = _vec_list(asset.front_axis)
    if asset.anchors:
        doc["anchors"] = {name: _vec_list(v) for name, v in asset.anchors.items()}
    if asset.tags:
        doc["tags"] = list(asset.tags)
    return doc


def asset_from_dict(doc: Mapping[str, Any]) -> AssetSpec:
    try:
        return AssetSpec(
            asset_id=str(doc["asset_id"]),
            half_extents=Vec3.of(doc["half_extents"]),
            front_axis=Vec3.of(doc["front_axis"]) if "front_axis" in doc else Vec3(0.0, 0.0, 1.0),
            anchors={str(k): Vec3.of(v) for k, v in (doc.get("anchors") or {}).items()},
            tags=tuple(doc.get("tags") or ()),
        )
    except KeyError as exc:
        raise SceneValidationError(f"asset record missing field {exc}") from None


def object_to_dict(obj: ObjectInstance, *, catalog: Mapping[str, AssetSpec] | None = None) -> dict[str, Any]:
    """Serialize an object; geometry matching its catalog asset is elided."""
    doc: dict[str, Any] = {
        "id": obj.id,
        "asset_id": obj.asset_id,
        "position": _vec_list(obj.position),
    }
    o = obj.orientation
    if o.pitch == 0.0 and o.roll == 0.0:
        doc["yaw"] = o.yaw
    else:
        doc["orientation"] = {"yaw": o.yaw, "pitch": o.pitch, "roll": o.roll}
    if obj.scale != ScaleVec():
        doc["scale"] = list(obj.scale.as_tuple())
    asset = (catalog or {}).get(obj.asset_id)
    same_geometry = asset is not None and (
        asset.half_extents == obj.half_extents
        and asset.front_axis == obj.front_axis
        and dict(asset.anchors) == dict(obj.anchors)
    )
    if not same_geometry:
        doc["half_extents"] = _vec_list(obj.half_extents)
        if obj.front_axis != Vec3(0.0, 0.0, 1.0):
            doc["front_axis"] = _vec_list(obj.front_axis)
        if obj.anchors:
            doc["anchors"] = {name: _vec_list(v) for name, v in obj.anchors.items()}
    return doc


def object_from_dict(doc: Mapping[str, Any], catalog: Mapping[str, AssetSpec]) -> ObjectInstance:
    try:
        asset_id = str(doc["asset_id"])
    except KeyError:
        raise SceneValidationError(f"object record missing asset_id: {doc!r}") from None
    asset = catalog.get(asset_id)
    if "orientation" in doc:
        o = doc["orientation"] or {}
        orientation = Orientation(
            float(o.get("yaw", 0.0)), float(o.get("pitch", 0.0)), float(o.get("roll", 0.0))
        )
    else:
        orientation = Orientation(float(doc.get("yaw", 0.0)))
    if "half_extents" in doc:
        half_extents = Vec3.of(doc["half_extents"])
    elif asset is not None:
        half_extents = asset.half_extents
    else:
        raise SceneValidationError(
            f"object {doc.get('id')!r}: unknown asset {asset_id!r} and no inline half_extents"
        )
    if "front_axis" in doc:
        front_axis = Vec3.of(doc["front_axis"])
    else:
        front_axis = asset.front_axis if asset is not None else Vec3(0.0, 0.0, 1.0)
    if "anchors" in doc:
        anchors = {str(k): Vec3.of(v) for k, v in (doc["anchors"] or {}).items()}
    else:
        anchors = dict(asset.anchors) if asset is not None else {}
    scale = ScaleVec(*doc["scale"]) if "scale" in doc else ScaleVec()
    return ObjectInstance(
        id=str(doc.get("id") or ""),
        asset_id=asset_id,
        position=Vec3.of(doc.get("position", (0.0, 0.0, 0.0))),
        orientation=orientation,
        scale=scale,
        half_extents=half_extents,
        front_axis=front_axis,
        anchors=anchors,
    )


def scene_to_text(scene: Scene) -> str:
    catalog = {a.asset_id: a for a in scene.catalog}
    doc = {
        "assets": [asset_to_dict(a) for a in scene.catalog],
        "objects": [object_to_dict(o, catalog=catalog) for o in scene.objects],
    }
    return dump_yaml(doc)


def scene_from_text(text: str, *, base_dir: str | None = None, extra_catalog: tuple[AssetSpec, ...] = ()) -> Scene:
    doc = yaml.safe_load(text) or {}
    return _scene_from_doc(doc, base_dir=base_dir, extra_catalog=extra_catalog)


def _scene_from_doc(doc: Mapping[str, Any], *, base_dir: str | None, extra_catalog: tuple[AssetSpec, ...]) -> Scene:
    if not isinstance(doc, Mapping):
        raise SceneValidationError(f"scene document must be a mapping, got {type(doc).__name__}")
    assets: list[AssetSpec] = list(extra_catalog)
    if "catalog" in doc and doc["catalog"]:
        ref = str(doc["catalog"])
        path = ref if os.path.isabs(ref) or base_dir is None else os.path.join(base_dir, ref)
        assets.extend(load_catalog(path))
    for rec in doc.get("assets") or []:
        assets.append(asset_from_dict(rec))
    # later records win on id collision so scene files can refine a shared catalog
    merged: dict[str, AssetSpec] = {}
    for asset in assets:
        merged[asset.asset_id] = asset
    catalog = tuple(merged.values())
    lookup = {a.asset_id: a for a in catalog}
    objects = tuple(object_from_dict(rec, lookup) for rec in doc.get("objects") or [])
    return Scene(objects, catalog)


def load_scene(path: str, *, extra_catalog: tuple[AssetSpec, ...] = ()) -> Scene:
    doc = load_yaml(path)
    return _scene_from_doc(doc or {}, base_dir=os.path.dirname(os.path.abspath(path)), extra_catalog=extra_catalog)


def save_scene(scene: Scene, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scene_to_text(scene))


def load_catalog(path: str) -> tuple[AssetSpec, ...]:
    doc = load_yaml(path) or {}
    records = doc.get("assets") if isinstance(doc, Mapping) else doc
    return tuple(asset_from_dict(rec) for rec in records or [])

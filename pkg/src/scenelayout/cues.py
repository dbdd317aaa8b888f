"""Annotated scene renders used to ground layout decisions visually.

The main viewport is a fixed isometric projection (screen-up is world +x+z,
so stacks read bottom to top); optional panels add a top-down inset and a
2x2 grid of axis-aligned side views. Cue layers (front markers, wireframe,
clearance circles, object indices, coordinate read-outs, relation angles)
toggle independently and are grouped into named presets.

Output is plain SVG text assembled from a primitive list, so renders are
byte-stable for a given scene; the same primitives feed a PNG backend.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

from . import geom
from .scene import (
    ObjectInstance,
    Scene,
    Vec3,
    bearing_deg,
    front_yaw,
    local_to_world,
    rotate_vector,
    world_aabb,
    world_corners,
    wrap_signed,
)

logger = logging.getLogger(__name__)

FRONT_COLOR = "#1f77b4"   # local +z
RIGHT_COLOR = "#d62728"   # local +x
UP_COLOR = "#2ca02c"      # local +y
CIRCLE_OK_COLOR = "#2ca02c"
CIRCLE_HIT_COLOR = "#d62728"
GROUND_FILL = "#e8e8e8"
TEXT_COLOR = "#222222"

_PALETTE = (
    "#4c78a8", "#f58518", "#54a24b", "#b279a2", "#e45756",
    "#72b7b2", "#eeca3b", "#9d755d", "#bab0ac", "#7b4173",
)

CLEARANCE_FACTOR = 4.0 / 3.0
CANVAS_W = 800
CANVAS_H = 600
MARGIN = 24.0
INSET_SIDE = 220.0
LINE_H = 14


def fmt_cue(x: float) -> str:
    """Fixed-width coordinate text so annotated values are byte-stable."""
    return f"{x:.9f}"


@dataclass(frozen=True)
class CueOptions:
    """Which annotation layers to draw."""

    front_marker_single: bool = False
    front_marker_triple: bool = False
    front_shader: bool = False
    wireframe: bool = False
    clearance_circles: bool = False
    indices: bool = False
    top_view: bool = False
    four_views: bool = False
    bounding_box_text: bool = False
    relation_angle_text: bool = False


PRESETS: dict[str, CueOptions] = {
    "none": CueOptions(),
    "bb": CueOptions(bounding_box_text=True),
    "single+ra+bb": CueOptions(
        front_marker_single=True, relation_angle_text=True, bounding_box_text=True
    ),
    "triple+ra+bb": CueOptions(
        front_marker_triple=True, relation_angle_text=True, bounding_box_text=True
    ),
    "wf+ra+bb": CueOptions(
        wireframe=True, relation_angle_text=True, bounding_box_text=True
    ),
    "sd+ra+bb": CueOptions(
        front_shader=True, relation_angle_text=True, bounding_box_text=True
    ),
    "triple+ra+bb+top": CueOptions(
        front_marker_triple=True,
        relation_angle_text=True,
        bounding_box_text=True,
        top_view=True,
        clearance_circles=True,
        indices=True,
    ),
}
DEFAULT_PRESET = "triple+ra+bb+top"


def options_for(preset: str) -> CueOptions:
    try:
        return PRESETS[preset]
    except KeyError:
        raise KeyError(f"unknown cue preset {preset!r}; known: {sorted(PRESETS)}") from None


def relation_angle_deg(scene: Scene, target_id: str, related_id: str) -> float:
    """Bearing of the related object in the target's facing frame, degrees.

    0 means dead ahead, +90 means 90 degrees clockwise from the target's
    front when viewed from above. Rotating the target by +d subtracts d.
    Coincident ground positions have no defined bearing and read as 0.
    """
    target = scene.get(target_id)
    related = scene.get(related_id)
    dx = related.position.x - target.position.x
    dz = related.position.z - target.position.z
    if abs(dx) < 1e-12 and abs(dz) < 1e-12:
        logger.warning(
            "relation angle %s->%s undefined for coincident centers; using 0.0",
            target_id,
            related_id,
        )
        return 0.0
    return wrap_signed(bearing_deg(dx, dz) - front_yaw(target))


# --- primitive list -----------------------------------------------------------
# ("poly", points, fill|None, stroke|None, width)
# ("line", x1, y1, x2, y2, color, width)
# ("circle", cx, cy, r, stroke|None, fill|None, width)
# ("text", x, y, s, color, size)

Primitive = tuple


@dataclass(frozen=True)
class Figure:
    width: int
    height: int
    primitives: tuple[Primitive, ...]


def _mix(color: str, other: str, t: float) -> str:
    a = [int(color[i : i + 2], 16) for i in (1, 3, 5)]
    b = [int(other[i : i + 2], 16) for i in (1, 3, 5)]
    return "#" + "".join(f"{round(x + (y - x) * t):02x}" for x, y in zip(a, b))


def _lighten(color: str, t: float) -> str:
    return _mix(color, "#ffffff", t)


def _darken(color: str, t: float) -> str:
    return _mix(color, "#000000", t)


_ISO_C = math.cos(math.radians(30.0))
_ISO_S = math.sin(math.radians(30.0))


def _iso(p: Vec3) -> tuple[float, float]:
    """World point to unscaled isometric plane coordinates (v up)."""
    return ((p.x - p.z) * _ISO_C, p.y + (p.x + p.z) * _ISO_S)


# box corner k: bit2 -> +x, bit1 -> +y, bit0 -> +z (matches scene corners)
_FACES = (
    ((1.0, 0.0, 0.0), (4, 5, 7, 6)),
    ((-1.0, 0.0, 0.0), (0, 2, 3, 1)),
    ((0.0, 1.0, 0.0), (2, 3, 7, 6)),
    ((0.0, -1.0, 0.0), (0, 4, 5, 1)),
    ((0.0, 0.0, 1.0), (1, 5, 7, 3)),
    ((0.0, 0.0, -1.0), (0, 2, 6, 4)),
)
_EDGES = (
    (0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 3),
    (2, 6), (3, 7), (4, 5), (4, 6), (5, 7), (6, 7),
)
_CAM_DIR = (-1.0, 1.0, -1.0)  # from scene toward the isometric camera


class _Viewport:
    """Maps plane coordinates (v up) into a screen rectangle."""

    def __init__(
        self,
        points: Sequence[tuple[float, float]],
        x0: float,
        y0: float,
        w: float,
        h: float,
        pad: float = 12.0,
    ) -> None:
        us = [p[0] for p in points] or [0.0]
        vs = [p[1] for p in points] or [0.0]
        u_min, u_max = min(us), max(us)
        v_min, v_max = min(vs), max(vs)
        du = max(u_max - u_min, 1e-6)
        dv = max(v_max - v_min, 1e-6)
        self.scale = min((w - 2 * pad) / du, (h - 2 * pad) / dv)
        self.ox = x0 + w / 2 - self.scale * (u_min + u_max) / 2
        self.oy = y0 + h / 2 + self.scale * (v_min + v_max) / 2

    def to_screen(self, uv: tuple[float, float]) -> tuple[float, float]:
        return (self.ox + self.scale * uv[0], self.oy - self.scale * uv[1])


def _object_color(scene: Scene, obj: ObjectInstance, index: int) -> str:
    if "ground" in scene.tags_of(obj.id):
        return GROUND_FILL
    return _PALETTE[index % len(_PALETTE)]


def _arrow(
    prims: list[Primitive],
    a: tuple[float, float],
    b: tuple[float, float],
    color: str,
    width: float = 1.6,
) -> None:
    prims.append(("line", a[0], a[1], b[0], b[1], color, width))
    dx, dy = b[0] - a[0], b[1] - a[1]
    length = math.hypot(dx, dy)
    if length < 1e-9:
        return
    ux, uy = dx / length, dy / length
    size = min(7.0, 0.4 * length)
    for side in (1.0, -1.0):
        wx = -ux * size + side * -uy * size * 0.6
        wy = -uy * size + side * ux * size * 0.6
        prims.append(("line", b[0], b[1], b[0] + wx, b[1] + wy, color, width))


def _marker_segments(
    obj: ObjectInstance, triple: bool
) -> list[tuple[Vec3, Vec3, str]]:
    """Axis arrows anchored at the top face center, in world space."""
    he = obj.half_extents
    top = Vec3(0.0, he.y, 0.0)
    segs = [(top, Vec3(0.0, he.y, he.z), FRONT_COLOR)]
    if triple:
        segs.append((top, Vec3(he.x, he.y, 0.0), RIGHT_COLOR))
        segs.append((top, Vec3(0.0, he.y + max(he.x, he.z), 0.0), UP_COLOR))
    return [
        (local_to_world(obj, a), local_to_world(obj, b), color) for a, b, color in segs
    ]


def _front_shade_quad(obj: ObjectInstance) -> list[Vec3]:
    """Front half of the top face, in world space."""
    he = obj.half_extents
    quad = [
        Vec3(-he.x, he.y, 0.0),
        Vec3(he.x, he.y, 0.0),
        Vec3(he.x, he.y, he.z),
        Vec3(-he.x, he.y, he.z),
    ]
    return [local_to_world(obj, p) for p in quad]


def clearance_circles(scene: Scene) -> list[tuple[str, tuple[float, float], float]]:
    """Per-object (id, ground-plane center, radius) clearance circles.

    The radius is the footprint bounding-circle radius times 4/3.
    """
    out = []
    for obj in scene.objects:
        center, radius = geom.bounding_circle(geom.footprint(obj))
        out.append((obj.id, center, radius * CLEARANCE_FACTOR))
    return out


def circle_collisions(
    circles: Sequence[tuple[str, tuple[float, float], float]],
) -> dict[str, bool]:
    """Which circles strictly intersect another circle (touching is clear)."""
    hit = {oid: False for oid, _, _ in circles}
    for i, (id_a, ca, ra) in enumerate(circles):
        for id_b, cb, rb in circles[i + 1 :]:
            if math.hypot(cb[0] - ca[0], cb[1] - ca[1]) < ra + rb:
                hit[id_a] = True
                hit[id_b] = True
    return hit


def _circle_colors(circles: Sequence[tuple[str, tuple[float, float], float]]) -> dict[str, str]:
    hits = circle_collisions(circles)
    return {oid: CIRCLE_HIT_COLOR if hits[oid] else CIRCLE_OK_COLOR for oid in hits}


def _draw_iso_view(
    prims: list[Primitive],
    scene: Scene,
    options: CueOptions,
    rect: tuple[float, float, float, float],
) -> None:
    x0, y0, w, h = rect
    pts: list[tuple[float, float]] = []
    for obj in scene.objects:
        pts.extend(_iso(c) for c in world_corners(obj))
    circles = clearance_circles(scene) if options.clearance_circles else []
    for _, (cx, cz), r in circles:
        for k in range(8):
            ang = math.tau * k / 8
            pts.append(_iso(Vec3(cx + r * math.cos(ang), 0.0, cz + r * math.sin(ang))))
    view = _Viewport(pts, x0, y0, w, h)

    def project(p: Vec3) -> tuple[float, float]:
        return view.to_screen(_iso(p))

    if circles:
        colors = _circle_colors(circles)
        for oid, (cx, cz), r in circles:
            ring = [
                project(Vec3(cx + r * math.cos(math.tau * k / 64), 0.0, cz + r * math.sin(math.tau * k / 64)))
                for k in range(65)
            ]
            for a, b in zip(ring, ring[1:]):
                prims.append(("line", a[0], a[1], b[0], b[1], colors[oid], 1.0))

    order = sorted(
        range(len(scene.objects)),
        key=lambda i: (
            -(scene.objects[i].position.x + scene.objects[i].position.z),
            scene.objects[i].position.y,
            i,
        ),
    )
    for i in order:
        obj = scene.objects[i]
        base = _object_color(scene, obj, i)
        corners = world_corners(obj)
        screen = [project(c) for c in corners]
        if options.wireframe:
            for a, b in _EDGES:
                pa, pb = screen[a], screen[b]
                prims.append(("line", pa[0], pa[1], pb[0], pb[1], base, 1.2))
        else:
            shades = {
                (0.0, 1.0, 0.0): _lighten(base, 0.45),
                (0.0, -1.0, 0.0): _darken(base, 0.25),
            }
            for axis, idxs in _FACES:
                normal = rotate_vector(obj.orientation, Vec3(*axis))
                facing = (
                    normal.x * _CAM_DIR[0]
                    + normal.y * _CAM_DIR[1]
                    + normal.z * _CAM_DIR[2]
                )
                if facing <= 1e-9:
                    continue
                fill = shades.get(axis)
                if fill is None:
                    fill = _lighten(base, 0.15) if axis[0] or axis[2] else base
                prims.append(
                    ("poly", tuple(screen[k] for k in idxs), fill, _darken(base, 0.35), 0.8)
                )
        if options.front_shader and not options.wireframe:
            quad = [project(p) for p in _front_shade_quad(obj)]
            prims.append(("poly", tuple(quad), _mix(FRONT_COLOR, "#ffffff", 0.55), FRONT_COLOR, 0.8))
        if options.front_marker_single or options.front_marker_triple:
            for a, b, color in _marker_segments(obj, options.front_marker_triple):
                _arrow(prims, project(a), project(b), color)
        if options.indices:
            top = local_to_world(obj, Vec3(0.0, obj.half_extents.y, 0.0))
            sx, sy = project(top)
            prims.append(("text", sx + 4, sy - 4, str(i), TEXT_COLOR, 12))


def _draw_top_view(
    prims: list[Primitive],
    scene: Scene,
    options: CueOptions,
    rect: tuple[float, float, float, float],
) -> None:
    x0, y0, w, h = rect
    prims.append(
        ("poly", ((x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)), "#ffffff", "#999999", 1.0)
    )
    pts: list[tuple[float, float]] = []
    feet = []
    for obj in scene.objects:
        foot = geom.footprint(obj)
        feet.append(foot)
        pts.extend(foot.vertices)
    circles = clearance_circles(scene) if options.clearance_circles else []
    for _, (cx, cz), r in circles:
        pts.extend(((cx - r, cz - r), (cx + r, cz + r)))
    view = _Viewport(pts, x0, y0, w, h, pad=10.0)

    def project(pt: tuple[float, float]) -> tuple[float, float]:
        return view.to_screen(pt)

    for i, obj in enumerate(scene.objects):
        base = _object_color(scene, obj, i)
        ring = tuple(project(p) for p in feet[i].vertices)
        if len(ring) >= 3:
            prims.append(("poly", ring, _lighten(base, 0.45), _darken(base, 0.35), 0.8))
        if options.front_marker_single or options.front_marker_triple:
            he = obj.half_extents
            center = local_to_world(obj, Vec3(0.0, he.y, 0.0))
            nose = local_to_world(obj, Vec3(0.0, he.y, he.z))
            _arrow(
                prims,
                project((center.x, center.z)),
                project((nose.x, nose.z)),
                FRONT_COLOR,
                1.2,
            )
            if options.front_marker_triple:
                right = local_to_world(obj, Vec3(he.x, he.y, 0.0))
                _arrow(
                    prims,
                    project((center.x, center.z)),
                    project((right.x, right.z)),
                    RIGHT_COLOR,
                    1.2,
                )
                cx, cy = project((center.x, center.z))
                prims.append(("circle", cx, cy, 2.0, None, UP_COLOR, 1.0))
        if options.indices:
            cx, cy = project((obj.position.x, obj.position.z))
            prims.append(("text", cx + 3, cy - 3, str(i), TEXT_COLOR, 11))
    if circles:
        colors = _circle_colors(circles)
        for oid, (cx, cz), r in circles:
            sx, sy = project((cx, cz))
            prims.append(("circle", sx, sy, r * view.scale, colors[oid], None, 1.0))


_SIDE_VIEWS = (
    ("+x", lambda p: (-p.z, p.y)),
    ("-x", lambda p: (p.z, p.y)),
    ("+z", lambda p: (p.x, p.y)),
    ("-z", lambda p: (-p.x, p.y)),
)


def _draw_four_views(
    prims: list[Primitive],
    scene: Scene,
    rect: tuple[float, float, float, float],
) -> None:
    """Axis-aligned silhouettes; each view drops its axis (no mirroring)."""
    x0, y0, w, h = rect
    cw, ch = w / 2, h / 2
    for k, (label, project_uv) in enumerate(_SIDE_VIEWS):
        cx0 = x0 + (k % 2) * cw
        cy0 = y0 + (k // 2) * ch
        prims.append(
            ("poly", ((cx0, cy0), (cx0 + cw, cy0), (cx0 + cw, cy0 + ch), (cx0, cy0 + ch)), None, "#cccccc", 1.0)
        )
        prims.append(("text", cx0 + 6, cy0 + 16, label, TEXT_COLOR, 12))
        pts: list[tuple[float, float]] = []
        sils = []
        for obj in scene.objects:
            uv = [project_uv(c) for c in world_corners(obj)]
            sil = geom.convex_hull(uv)
            sils.append(sil)
            pts.extend(uv)
        view = _Viewport(pts, cx0, cy0, cw, ch)
        for i, obj in enumerate(scene.objects):
            base = _object_color(scene, obj, i)
            ring = tuple(view.to_screen(p) for p in sils[i].vertices)
            if len(ring) >= 3:
                prims.append(("poly", ring, _lighten(base, 0.5), _darken(base, 0.3), 0.8))


def cue_text_lines(
    scene: Scene,
    options: CueOptions,
    relation_pairs: Sequence[tuple[str, str]] = (),
) -> list[str]:
    """Textual cues matching the active preset, one string per line."""
    lines: list[str] = []
    if options.bounding_box_text:
        for i, obj in enumerate(scene.objects):
            box = world_aabb(obj)
            lines.append(
                f"{i} {obj.id}: yaw={fmt_cue(obj.orientation.yaw)}"
                f" min=({fmt_cue(box.min.x)},{fmt_cue(box.min.y)},{fmt_cue(box.min.z)})"
                f" max=({fmt_cue(box.max.x)},{fmt_cue(box.max.y)},{fmt_cue(box.max.z)})"
            )
    if options.relation_angle_text:
        for target_id, related_id in relation_pairs:
            angle = relation_angle_deg(scene, target_id, related_id)
            lines.append(f"angle {target_id}->{related_id} = {fmt_cue(angle)} deg")
    return lines


def build_figure(
    scene: Scene,
    options: CueOptions,
    relation_pairs: Sequence[tuple[str, str]] = (),
) -> Figure:
    prims: list[Primitive] = []
    prims.append(
        ("poly", ((0, 0), (CANVAS_W, 0), (CANVAS_W, CANVAS_H), (0, CANVAS_H)), "#ffffff", None, 0.0)
    )
    main_rect = (MARGIN, MARGIN, CANVAS_W - 2 * MARGIN, CANVAS_H - 2 * MARGIN)
    if scene.objects:
        if options.four_views:
            _draw_four_views(prims, scene, main_rect)
        else:
            _draw_iso_view(prims, scene, options, main_rect)
        if options.top_view:
            inset = (CANVAS_W - INSET_SIDE - MARGIN, MARGIN, INSET_SIDE, INSET_SIDE)
            _draw_top_view(prims, scene, options, inset)

    lines = cue_text_lines(scene, options, relation_pairs)
    y = CANVAS_H - 8.0 - LINE_H * (len(lines) - 1) if lines else 0.0
    for line in lines:
        prims.append(("text", MARGIN, y, line, TEXT_COLOR, 11))
        y += LINE_H
    return Figure(CANVAS_W, CANVAS_H, tuple(prims))


# --- backends -----------------------------------------------------------------


def _svg_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _px(v: float) -> str:
    return f"{v:.2f}"


def figure_to_svg(figure: Figure) -> str:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{figure.width}"'
        f' height="{figure.height}" viewBox="0 0 {figure.width} {figure.height}">'
    ]
    for prim in figure.primitives:
        kind = prim[0]
        if kind == "poly":
            _, points, fill, stroke, width = prim
            attrs = [f'points="{" ".join(f"{_px(x)},{_px(y)}" for x, y in points)}"']
            attrs.append(f'fill="{fill}"' if fill else 'fill="none"')
            if stroke:
                attrs.append(f'stroke="{stroke}" stroke-width="{_px(width)}"')
            out.append(f"<polygon {' '.join(attrs)}/>")
        elif kind == "line":
            _, x1, y1, x2, y2, color, width = prim
            out.append(
                f'<line x1="{_px(x1)}" y1="{_px(y1)}" x2="{_px(x2)}" y2="{_px(y2)}"'
                f' stroke="{color}" stroke-width="{_px(width)}"/>'
            )
        elif kind == "circle":
            _, cx, cy, r, stroke, fill, width = prim
            attrs = [f'cx="{_px(cx)}" cy="{_px(cy)}" r="{_px(r)}"']
            attrs.append(f'fill="{fill}"' if fill else 'fill="none"')
            if stroke:
                attrs.append(f'stroke="{stroke}" stroke-width="{_px(width)}"')
            out.append(f"<circle {' '.join(attrs)}/>")
        elif kind == "text":
            _, x, y, s, color, size = prim
            out.append(
                f'<text x="{_px(x)}" y="{_px(y)}" font-family="monospace"'
                f' font-size="{size}" fill="{color}">{_svg_escape(s)}</text>'
            )
        else:  # pragma: no cover - primitive kinds are fixed above
            raise ValueError(f"unknown primitive {kind!r}")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def figure_to_png_bytes(figure: Figure) -> bytes:
    import io

    from PIL import Image, ImageDraw, ImageFont

    image = Image.new("RGB", (figure.width, figure.height), "#ffffff")
    draw = ImageDraw.Draw(image)
    font = ImageFont.load_default()
    for prim in figure.primitives:
        kind = prim[0]
        if kind == "poly":
            _, points, fill, stroke, width = prim
            draw.polygon([tuple(p) for p in points], fill=fill, outline=stroke)
        elif kind == "line":
            _, x1, y1, x2, y2, color, width = prim
            draw.line((x1, y1, x2, y2), fill=color, width=max(1, round(width)))
        elif kind == "circle":
            _, cx, cy, r, stroke, fill, width = prim
            draw.ellipse((cx - r, cy - r, cx + r, cy + r), outline=stroke, fill=fill)
        elif kind == "text":
            _, x, y, s, color, size = prim
            draw.text((x, y - 10), s, fill=color, font=font)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def render_svg(
    scene: Scene,
    options: CueOptions | None = None,
    *,
    preset: str = DEFAULT_PRESET,
    relation_pairs: Sequence[tuple[str, str]] = (),
) -> str:
    if options is None:
        options = options_for(preset)
    return figure_to_svg(build_figure(scene, options, relation_pairs))


def render_png_bytes(
    scene: Scene,
    options: CueOptions | None = None,
    *,
    preset: str = DEFAULT_PRESET,
    relation_pairs: Sequence[tuple[str, str]] = (),
) -> bytes:
    if options is None:
        options = options_for(preset)
    return figure_to_png_bytes(build_figure(scene, options, relation_pairs))

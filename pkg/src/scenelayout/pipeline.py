"""Generate / place / judge loop for one instruction.

Deterministic mode proposes the pose with the coordinate-descent solver and
repairs failures by applying the judge's suggested corrections verbatim.
VLM mode defers proposal and repair to a chat model: the worker sees the
scene text, an annotated render and the previous verdict's violations, and
answers with a new pose. Both modes share the deterministic judge, and a
run's loop count is the number of judge calls it took (at least one).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

from .cues import DEFAULT_PRESET, options_for, render_svg
from .energy import ConstraintSpec, PlacementProblem, compile_constraints
from .judge import DEFAULT_EPSILON, Verdict, judge
from .optimize import SolveConfig, apply_correction, solve
from .scene import Orientation, Scene, SceneValidationError, Vec3, scene_snapshot_text
from .vlm import VlmClient

MODES = ("deterministic", "vlm")


@dataclass(frozen=True)
class Instruction:
    """One natural-language step plus the placement decision it implies.

    ``object_id`` names the object to place or move; when it is not in the
    scene yet, ``asset_id`` (with the spawn pose) says what to create. This
    is the table-driven stand-in for the generate stage, so deterministic
    runs need no model.
    """

    text: str
    object_id: str
    asset_id: str | None = None
    spawn_position: Vec3 = Vec3(0.0, 0.0, 0.0)
    spawn_yaw: float = 0.0


@dataclass(frozen=True)
class RunRecord:
    success: bool
    wall_seconds: float
    judge_loops: int
    verdicts: tuple[Verdict, ...]
    final_scene: Scene


def relation_pairs_of(problem: PlacementProblem) -> tuple[tuple[str, str], ...]:
    """(subject, related) pairs worth annotating with relation angles."""
    pairs: dict[tuple[str, str], None] = {}
    for aff in problem.affordances:
        pairs.setdefault((aff.subject_id, aff.related_id))
    for rel in problem.relations:
        pairs.setdefault((rel.subject_id, rel.related_id))
    return tuple(pairs)


def _ensure_target(scene: Scene, instruction: Instruction) -> Scene:
    if instruction.object_id in scene:
        return scene
    if instruction.asset_id is None:
        raise SceneValidationError(
            f"object {instruction.object_id!r} is not in the scene and the "
            "instruction names no asset to spawn"
        )
    return scene.spawn(
        instruction.asset_id,
        instruction.object_id,
        instruction.spawn_position,
        Orientation(instruction.spawn_yaw),
    )


def _apply_pose(scene: Scene, object_id: str, doc: dict) -> Scene:
    obj = scene.get(object_id)
    position = Vec3.of(doc["position"]) if "position" in doc else obj.position
    yaw = float(doc.get("yaw", obj.orientation.yaw))
    return scene.with_object(
        obj.with_pose(position, Orientation(yaw, obj.orientation.pitch, obj.orientation.roll))
    )


def run(
    scene: Scene,
    instruction: Instruction,
    constraints: Sequence[ConstraintSpec],
    *,
    mode: str = "deterministic",
    client: VlmClient | None = None,
    max_loops: int = 8,
    epsilon: float = DEFAULT_EPSILON,
    solve_config: SolveConfig = SolveConfig(),
    cue_preset: str = DEFAULT_PRESET,
    clearance: float = 0.0,
) -> RunRecord:
    """Execute one instruction against the cumulative constraint set."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "vlm" and client is None:
        raise ValueError("vlm mode needs a client")
    if max_loops < 1:
        raise ValueError("max_loops must be >= 1")

    started = time.perf_counter()
    scene = _ensure_target(scene, instruction)
    target_id = instruction.object_id
    problem = compile_constraints(scene, constraints, clearance=clearance)
    options = options_for(cue_preset)
    pairs = relation_pairs_of(problem)

    if mode == "deterministic":
        result = solve(scene, problem, target_id, solve_config)
        scene = scene.with_object(
            scene.get(target_id).with_pose(result.position, result.orientation)
        )
    else:
        assert client is not None
        proposal = client.generate_step(instruction.text, scene_snapshot_text(scene))
        if proposal.get("object_id") == target_id:
            scene = _apply_pose(scene, target_id, proposal)
        feedback: list[dict] = []
        svg = render_svg(scene, options, relation_pairs=pairs)
        placed = client.worker_step(
            instruction.text, scene_snapshot_text(scene), target_id, feedback, svg
        )
        scene = _apply_pose(scene, target_id, placed)

    verdicts: list[Verdict] = []
    success = False
    for _ in range(max_loops):
        verdict = judge(scene, problem, epsilon=epsilon, target_id=target_id)
        verdicts.append(verdict)
        if verdict.passed:
            success = True
            break
        if len(verdicts) == max_loops:
            break
        if mode == "deterministic":
            for violation in verdict.violations:
                if violation.suggested_delta is None:
                    continue
                move, yaw_delta = violation.suggested_delta
                scene = apply_correction(scene, target_id, move, yaw_delta)
        else:
            assert client is not None
            svg = render_svg(scene, options, relation_pairs=pairs)
            feedback = [v.as_dict() for v in verdict.violations]
            placed = client.worker_step(
                instruction.text, scene_snapshot_text(scene), target_id, feedback, svg
            )
            scene = _apply_pose(scene, target_id, placed)

    return RunRecord(
        success=success,
        wall_seconds=time.perf_counter() - started,
        judge_loops=len(verdicts),
        verdicts=tuple(verdicts),
        final_scene=scene,
    )

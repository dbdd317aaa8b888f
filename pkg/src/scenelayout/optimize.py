"""Multi-restart coordinate descent over one object's pose.

Derivative-free: each sweep probes +/- steps along x, y, z and yaw, keeps
strict improvements and decays the step sizes when a sweep stalls. Restart 0
is anchor-informed (seeded from the problem's relative-placement targets);
later restarts perturb that guess with a seeded RNG, so results are
deterministic for a given (problem, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .energy import EnergyBreakdown, PlacementProblem, total_energy
from .scene import Orientation, Scene, Vec3, bearing_deg, front_yaw, wrap_signed

Observer = Callable[[int, int, float], None]
"""(restart, sweep, best_energy) called after every sweep."""


@dataclass(frozen=True)
class SolveConfig:
    max_iterations: int = 500
    restarts: int = 8
    initial_step: float = 0.5
    step_decay: float = 0.7
    yaw_step_deg: float = 15.0
    seed: int = 0
    target_epsilon: float = 1e-6
    min_step: float = 1e-7
    stop_on_converged: bool = True
    use_anchor_init: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not (0.0 < self.step_decay < 1.0):
            raise ValueError("step_decay must be in (0, 1)")
        if self.initial_step <= 0.0 or self.yaw_step_deg <= 0.0:
            raise ValueError("step sizes must be > 0")


@dataclass(frozen=True)
class SolveResult:
    position: Vec3
    orientation: Orientation
    breakdown: EnergyBreakdown
    iterations_used: int
    converged: bool

    @property
    def final_transform(self) -> tuple[Vec3, Orientation]:
        return self.position, self.orientation


def _anchor_guess(
    scene: Scene, problem: PlacementProblem, target_id: str
) -> tuple[Vec3, float]:
    """Initial pose implied by the problem's targets for ``target_id``.

    Position: for the first relation naming the target as subject, pinned
    components come from related + offset and free ones from the related
    object's center. Yaw: exact heading satisfying the first facing spec.
    Falls back to the current pose when nothing pins a component.
    """
    current = scene.get(target_id)
    pos = current.position
    for rel in problem.relations:
        if rel.subject_id != target_id:
            continue
        related = scene.get(rel.related_id).position
        pinned = related + rel.target_offset
        comps = [
            related_c if free else pinned_c
            for free, pinned_c, related_c in zip(
                rel.free, pinned.as_tuple(), related.as_tuple()
            )
        ]
        pos = Vec3(*comps)
        break
    yaw = current.orientation.yaw
    for aff in problem.affordances:
        if aff.subject_id != target_id:
            continue
        related = scene.get(aff.related_id).position
        if aff.mode == "face_same_direction":
            yaw = front_yaw(scene.get(aff.related_id))
        else:
            d = related - pos
            if abs(d.x) < 1e-12 and abs(d.z) < 1e-12:
                break
            heading = bearing_deg(d.x, d.z)
            yaw = heading + 180.0 if aff.mode == "face_away" else heading
        break
    return pos, yaw % 360.0


def _descend(
    evaluate: Callable[[float, float, float, float], float],
    start: tuple[float, float, float, float],
    config: SolveConfig,
    budget: int,
    restart: int,
    observer: Observer | None,
) -> tuple[tuple[float, float, float, float], float, int]:
    """Coordinate descent from ``start``; returns (pose, energy, sweeps used)."""
    x, y, z, yaw = start
    best = evaluate(x, y, z, yaw)
    step = config.initial_step
    yaw_step = config.yaw_step_deg
    sweeps = 0
    while sweeps < budget:
        improved = False
        for axis in range(4):
            delta = yaw_step if axis == 3 else step
            for sign in (1.0, -1.0):
                cand = [x, y, z, yaw]
                cand[axis] += sign * delta
                value = evaluate(*cand)
                if value < best - 1e-15:
                    x, y, z, yaw = cand
                    best = value
                    improved = True
                    break
        sweeps += 1
        if observer is not None:
            observer(restart, sweeps, best)
        if best <= config.target_epsilon:
            break
        if not improved:
            step *= config.step_decay
            yaw_step *= config.step_decay
            if step < config.min_step and yaw_step < config.min_step:
                break
    return (x, y, z, yaw), best, sweeps


def solve(
    scene: Scene,
    problem: PlacementProblem,
    target_id: str,
    config: SolveConfig = SolveConfig(),
    *,
    _observer: Observer | None = None,
) -> SolveResult:
    """Optimize ``target_id``'s position and yaw against the problem's energy.

    Runs ``config.restarts`` independent descents and keeps the best final
    energy (ties broken by lower restart index). ``iterations_used`` counts
    sweeps across all restarts; ``converged`` is True when the best energy
    reached ``config.target_epsilon``.
    """
    current = scene.get(target_id)
    base_orientation = current.orientation

    def evaluate(x: float, y: float, z: float, yaw: float) -> float:
        candidate = scene.with_object(
            current.with_pose(
                Vec3(x, y, z),
                Orientation(yaw, base_orientation.pitch, base_orientation.roll),
            )
        )
        return total_energy(candidate, problem).total

    if config.use_anchor_init:
        anchor_pos, anchor_yaw = _anchor_guess(scene, problem, target_id)
    else:
        anchor_pos, anchor_yaw = current.position, current.orientation.yaw

    starts: list[tuple[float, float, float, float]] = []
    for k in range(config.restarts):
        if k == 0:
            starts.append((anchor_pos.x, anchor_pos.y, anchor_pos.z, anchor_yaw))
        else:
            rng = np.random.default_rng((config.seed, k))
            dx, dy, dz = rng.normal(0.0, 2.0 * config.initial_step, size=3)
            dyaw = rng.uniform(0.0, 360.0)
            starts.append(
                (anchor_pos.x + dx, anchor_pos.y + dy, anchor_pos.z + dz, (anchor_yaw + dyaw) % 360.0)
            )

    best_pose: tuple[float, float, float, float] | None = None
    best_energy = math.inf
    total_sweeps = 0
    for k, start in enumerate(starts):
        budget = config.max_iterations - total_sweeps
        if budget <= 0:
            break
        pose, value, used = _descend(evaluate, start, config, budget, k, _observer)
        total_sweeps += used
        if value < best_energy:
            best_pose, best_energy = pose, value
        if config.stop_on_converged and best_energy <= config.target_epsilon:
            break

    assert best_pose is not None  # restarts >= 1 and max_iterations >= 1
    x, y, z, yaw = best_pose
    position = Vec3(x, y, z)
    orientation = Orientation(yaw % 360.0, base_orientation.pitch, base_orientation.roll)
    final_scene = scene.with_object(current.with_pose(position, orientation))
    return SolveResult(
        position=position,
        orientation=orientation,
        breakdown=total_energy(final_scene, problem),
        iterations_used=total_sweeps,
        converged=best_energy <= config.target_epsilon,
    )


def apply_correction(
    scene: Scene, target_id: str, move: Vec3 = Vec3(0.0, 0.0, 0.0), yaw_delta: float = 0.0
) -> Scene:
    """Nudge one object by a translation and a yaw increment."""
    obj = scene.get(target_id)
    orientation = Orientation(
        wrap_signed(obj.orientation.yaw + yaw_delta) % 360.0,
        obj.orientation.pitch,
        obj.orientation.roll,
    )
    return scene.with_object(obj.with_pose(obj.position + move, orientation))

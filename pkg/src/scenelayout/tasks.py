"""Benchmark task catalog, success predicates and the evaluation harness.

Tasks are data: each YAML file names an initial scene, a sequence of
instruction steps with declarative constraints, and the thresholds its
success predicate uses. The predicate route is independent of the energy
route (direct geometric checks vs. compiled terms), which is what the
fixture tests compare.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import yaml

from . import geom, pipeline
from .energy import (
    AT_OFFSET,
    DEFAULT_NEXT_TO_FACTOR,
    EQUAL_SPACING,
    FACING_MODES,
    IN_FRONT_OF,
    INSIDE,
    MUTUAL_FACING,
    NEXT_TO,
    ON,
    ORDERED_ROW,
    ROW,
    SIDE_OF,
    STACK,
    SYMMETRIC_PAIR,
    AffordanceSpec,
    ConstraintSpec,
    CultureSpec,
    SocialSpec,
    adjacent_gaps,
    collision_pairs_for,
    facing_error,
    front_halfspace_margin,
    gap_variance,
    mirrored_point,
    mutual_misalignments,
    resting_offset,
    row_projections,
    side_margin,
)
from .optimize import SolveConfig
from .pipeline import Instruction, RunRecord
from .scene import (
    Scene,
    SceneValidationError,
    UnknownObjectError,
    Vec3,
    front_yaw,
    rotate_vector,
)
from .sceneio import load_scene
from .vlm import VlmClient

LEVELS = (1, 2, 3, 4)
LENGTH_GUARD = 1e-4
ANGLE_GUARD = 1e-3
SPACING_VARIANCE_TOL = 1e-4
DEFAULT_TASK_EPSILON = 1e-9


@dataclass(frozen=True)
class TaskStep:
    instruction: Instruction
    constraints: tuple[ConstraintSpec, ...]


@dataclass(frozen=True)
class TaskDef:
    id: str
    level: int
    title: str
    scene_path: Path
    steps: tuple[TaskStep, ...]
    instruction: str = ""
    epsilon: float = DEFAULT_TASK_EPSILON
    max_loops: int = 8
    path: Path | None = None

    def __post_init__(self) -> None:
        if self.level not in LEVELS:
            raise SceneValidationError(f"task level must be 1..4, got {self.level}")
        if not self.steps:
            raise SceneValidationError(f"task {self.id} has no steps")
        if self.epsilon <= 0.0:
            raise SceneValidationError(f"task epsilon must be > 0, got {self.epsilon}")
        if not self.instruction:
            object.__setattr__(self, "instruction", self.title)

    def load_scene(self) -> Scene:
        return load_scene(self.scene_path)

    def cumulative_constraints(self, upto: int) -> tuple[ConstraintSpec, ...]:
        """Constraints in force after steps 0..upto inclusive."""
        out: list[ConstraintSpec] = []
        for step in self.steps[: upto + 1]:
            out.extend(step.constraints)
        return tuple(out)

    def all_constraints(self) -> tuple[ConstraintSpec, ...]:
        return self.cumulative_constraints(len(self.steps) - 1)


def _step_from_doc(doc: Mapping[str, Any]) -> TaskStep:
    spawn = doc.get("spawn") or {}
    instruction = Instruction(
        text=str(doc["say"]),
        object_id=str(doc["place"]),
        asset_id=spawn.get("asset"),
        spawn_position=Vec3.of(spawn.get("position", (0.0, 0.0, 0.0))),
        spawn_yaw=float(spawn.get("yaw", 0.0)),
    )
    constraints = tuple(ConstraintSpec.from_mapping(c) for c in doc.get("constraints", ()))
    return TaskStep(instruction, constraints)


def load_task(path: str | Path) -> TaskDef:
    path = Path(path)
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise SceneValidationError(f"task file {path} is not a mapping")
    try:
        scene_path = (path.parent / doc["scene"]).resolve()
        return TaskDef(
            id=str(doc["id"]),
            level=int(doc["level"]),
            title=str(doc["title"]),
            scene_path=scene_path,
            steps=tuple(_step_from_doc(s) for s in doc["steps"]),
            instruction=str(doc.get("instruction", "")),
            epsilon=float(doc.get("epsilon", DEFAULT_TASK_EPSILON)),
            max_loops=int(doc.get("max_loops", 8)),
            path=path,
        )
    except KeyError as exc:
        raise SceneValidationError(f"task file {path} missing field {exc}") from exc


def builtin_task_dir() -> Path:
    return Path(str(resources.files("scenelayout"))) / "data" / "tasks"


def builtin_task_paths() -> list[Path]:
    return sorted(builtin_task_dir().glob("*.yaml"))


def load_builtin_tasks() -> list[TaskDef]:
    return [load_task(p) for p in builtin_task_paths()]


# --- success predicates --------------------------------------------------------


def _support_band(related_obj, fraction: float = 0.01) -> float:
    return fraction * 2.0 * related_obj.half_extents.y * related_obj.scale.sy


def _check_constraint(scene: Scene, c: ConstraintSpec, problems: list[str]) -> None:
    def fail(reason: str) -> None:
        problems.append(f"{c.kind}: {reason}")

    if c.kind == ON:
        subject = scene.get(c.subject)
        related = scene.get(c.related)
        rest = resting_offset(related, c.anchor)
        surface_y = related.position.y + rest.y
        bottom = subject.position.y - subject.half_extents.y * subject.scale.sy
        gap = bottom - surface_y
        if abs(gap) > _support_band(related) + LENGTH_GUARD:
            fail(f"{c.subject} rests {gap:+.4f} m off {c.related}'s surface")
        foot = geom.footprint(related)
        if geom.distance_to_polygon(foot, (subject.position.x, subject.position.z)) > LENGTH_GUARD:
            fail(f"{c.subject} center is outside {c.related}'s footprint")
    elif c.kind == INSIDE:
        subject = scene.get(c.subject)
        related = scene.get(c.related)
        spot = resting_offset(related, c.anchor) if c.anchor else Vec3(0.0, 0.0, 0.0)
        radius = c.radius if c.radius is not None else min(
            related.half_extents.x * related.scale.sx,
            related.half_extents.z * related.scale.sz,
        )
        horiz = math.hypot(
            subject.position.x - (related.position.x + spot.x),
            subject.position.z - (related.position.z + spot.z),
        )
        if horiz > radius + LENGTH_GUARD:
            fail(f"{c.subject} is {horiz:.4f} m from {c.related}'s interior center")
        if abs(subject.position.y - (related.position.y + spot.y)) > _support_band(related) + LENGTH_GUARD:
            fail(f"{c.subject} is at the wrong height inside {c.related}")
    elif c.kind == NEXT_TO:
        subject = scene.get(c.subject)
        related = scene.get(c.related)
        if c.max_distance is not None:
            d_max = c.max_distance
        else:
            _, r_s = geom.bounding_circle(geom.footprint(subject))
            _, r_r = geom.bounding_circle(geom.footprint(related))
            d_max = DEFAULT_NEXT_TO_FACTOR * (r_s + r_r)
        dist = geom.distance_to_polygon(
            geom.footprint(related), (subject.position.x, subject.position.z)
        )
        if dist > d_max + LENGTH_GUARD:
            fail(f"{c.subject} is {dist:.4f} m from {c.related}, limit {d_max:.4f}")
        if c.standing_y is not None and abs(subject.position.y - c.standing_y) > LENGTH_GUARD:
            fail(f"{c.subject} stands at y={subject.position.y:.4f}, expected {c.standing_y}")
    elif c.kind == AT_OFFSET:
        subject = scene.get(c.subject)
        related = scene.get(c.related)
        world = rotate_vector(related.orientation, related.scale.apply(Vec3.of(c.offset)))
        res = subject.position - related.position - world
        free = c.free if c.free is not None else (False, False, False)
        masked = [0.0 if f else v for f, v in zip(free, res.as_tuple())]
        norm = math.sqrt(sum(v * v for v in masked))
        if norm > c.offset_tolerance:
            fail(f"{c.subject} is {norm:.4f} m from its offset target near {c.related}")
    elif c.kind in FACING_MODES:
        spec = AffordanceSpec(c.subject, c.related, c.kind, c.tolerance_deg, c.weight)
        signed, _ = facing_error(scene, spec)
        if abs(signed) > c.tolerance_deg + ANGLE_GUARD:
            fail(f"{c.subject} is {abs(signed):.2f} deg off {c.kind} {c.related}")
    elif c.kind == SIDE_OF:
        spec = SocialSpec(SIDE_OF, (c.subject, c.related), side=c.side)
        margin = side_margin(scene, spec)
        if margin < -LENGTH_GUARD:
            fail(f"{c.subject} is on the wrong side of {c.related} ({c.side}) by {-margin:.4f} m")
    elif c.kind == IN_FRONT_OF:
        spec = SocialSpec(IN_FRONT_OF, (c.subject, c.related), anchor=c.anchor)
        margin = front_halfspace_margin(scene, spec)
        if margin < -LENGTH_GUARD:
            fail(f"{c.subject} is {-margin:.4f} m behind {c.related}'s front plane")
    elif c.kind == ROW:
        spec = SocialSpec(ORDERED_ROW, c.participants, axis_deg=c.axis_deg)
        proj = row_projections(scene, spec)
        for i, (a, b) in enumerate(zip(proj, proj[1:])):
            if b - a < -LENGTH_GUARD:
                fail(f"{c.participants[i]} and {c.participants[i + 1]} are out of row order")
    elif c.kind == EQUAL_SPACING:
        spec = SocialSpec(EQUAL_SPACING, c.participants, max_gap=c.max_gap)
        gaps = adjacent_gaps(scene, spec)
        if gap_variance(gaps) > SPACING_VARIANCE_TOL:
            fail(f"spacing variance {gap_variance(gaps):.6f} exceeds {SPACING_VARIANCE_TOL}")
        if c.max_gap is not None:
            for i, g in enumerate(gaps):
                if g > c.max_gap + LENGTH_GUARD:
                    fail(f"gap {i} is {g:.4f} m, limit {c.max_gap}")
    elif c.kind == MUTUAL_FACING:
        spec = SocialSpec(MUTUAL_FACING, c.participants, tolerance_deg=c.tolerance_deg)
        mis_a, mis_b = mutual_misalignments(scene, spec)
        if mis_a > c.tolerance_deg + ANGLE_GUARD or mis_b > c.tolerance_deg + ANGLE_GUARD:
            fail(
                f"{c.participants[0]} / {c.participants[1]} misaligned by "
                f"{mis_a:.2f} / {mis_b:.2f} deg"
            )
    elif c.kind == STACK:
        objs = [scene.get(pid) for pid in c.participants]
        for (la, lo), (ua, up) in zip(
            zip(c.participants, objs), zip(c.participants[1:], objs[1:])
        ):
            if up.position.y <= lo.position.y - LENGTH_GUARD:
                fail(f"{ua} is not above {la}")
            horiz = math.hypot(
                up.position.x - lo.position.x, up.position.z - lo.position.z
            )
            if horiz > c.center_tolerance + LENGTH_GUARD:
                fail(f"{ua} is {horiz:.4f} m off {la}'s center, limit {c.center_tolerance}")
    elif c.kind == SYMMETRIC_PAIR:
        axis_obj = scene.get(c.axis_object)
        spec = CultureSpec(
            SYMMETRIC_PAIR,
            c.participants,
            axis_deg=front_yaw(axis_obj),
            axis_point=(axis_obj.position.x, axis_obj.position.z),
        )
        a, b = (scene.get(pid) for pid in c.participants)
        residual = (mirrored_point(spec, a.position) - b.position).norm()
        if residual > c.symmetry_tolerance:
            fail(f"mirror residual {residual:.4f} m exceeds {c.symmetry_tolerance}")
    else:  # pragma: no cover - kinds validated at parse time
        raise SceneValidationError(f"no predicate for constraint kind {c.kind!r}")


def success_report(scene: Scene, task: TaskDef) -> list[str]:
    """Empty list when the task is satisfied, else one reason per failure."""
    problems: list[str] = []
    constraints = task.all_constraints()
    needed: set[str] = set()
    for c in constraints:
        needed.update(c.referenced_ids())
    missing = sorted(i for i in needed if i not in scene)
    if missing:
        return [f"missing object {i}" for i in missing]
    for c in constraints:
        try:
            _check_constraint(scene, c, problems)
        except UnknownObjectError as exc:  # pragma: no cover - missing ids caught above
            problems.append(f"{c.kind}: {exc}")
    for a, b in collision_pairs_for(scene, constraints):
        fa = geom.footprint(scene.get(a))
        fb = geom.footprint(scene.get(b))
        if geom.sat_overlap(fa, fb):
            problems.append(f"collision: {a} overlaps {b}")
    return problems


def success(scene: Scene, task: TaskDef) -> bool:
    return not success_report(scene, task)


# --- running and evaluation ------------------------------------------------------


@dataclass(frozen=True)
class TaskRunResult:
    task_id: str
    seed: int
    success: bool
    loops: int
    wall_seconds: float
    records: tuple[RunRecord, ...]
    final_scene: Scene


def run_task(
    task: TaskDef,
    *,
    mode: str = "deterministic",
    client: VlmClient | None = None,
    seed: int = 0,
    solve_config: SolveConfig | None = None,
) -> TaskRunResult:
    """Execute every step; the task succeeds when all steps pass the judge and
    the final scene satisfies the success predicate."""
    if solve_config is None:
        # The solver must chase the task's own pass bar, or step 1 ends at an
        # energy the judge still rejects and every trial burns a repair loop.
        solve_config = SolveConfig(seed=seed, target_epsilon=task.epsilon)
    config = solve_config
    scene = task.load_scene()
    records: list[RunRecord] = []
    all_passed = True
    for k, step in enumerate(task.steps):
        record = pipeline.run(
            scene,
            step.instruction,
            task.cumulative_constraints(k),
            mode=mode,
            client=client,
            max_loops=task.max_loops,
            epsilon=task.epsilon,
            solve_config=config,
        )
        records.append(record)
        scene = record.final_scene
        if not record.success:
            all_passed = False
            break
    ok = all_passed and success(scene, task)
    return TaskRunResult(
        task_id=task.id,
        seed=config.seed,
        success=ok,
        loops=max(r.judge_loops for r in records),
        wall_seconds=sum(r.wall_seconds for r in records),
        records=tuple(records),
        final_scene=scene,
    )


@dataclass(frozen=True)
class TrialRecord:
    task_id: str
    trial: int
    seed: int
    success: bool
    loops: int
    wall_seconds: float


@dataclass(frozen=True)
class TaskRow:
    task_id: str
    level: int
    title: str
    trials: int
    accuracy: float
    mean_loops: float
    mean_seconds: float
    error: str | None = None


@dataclass(frozen=True)
class EvalReport:
    mode: str
    trials: int
    seed: int
    rows: tuple[TaskRow, ...]
    trial_records: tuple[TrialRecord, ...]


def _trial_worker(args: tuple[str, str, int]) -> tuple[bool, int, float]:
    task_path, mode, seed = args
    result = run_task(load_task(task_path), mode=mode, seed=seed)
    return result.success, result.loops, result.wall_seconds


def evaluate(
    tasks: Sequence[TaskDef],
    *,
    mode: str = "deterministic",
    trials: int = 10,
    seed: int = 0,
    jobs: int = 1,
    client_factory: Callable[[TaskDef, int], VlmClient] | None = None,
    errors: Mapping[str, str] | None = None,
) -> EvalReport:
    """Run every task ``trials`` times (trial t uses seed ``seed + t``).

    ``jobs`` > 1 fans trials out to worker processes (deterministic-mode
    file-backed tasks only); results are aggregated in (task, trial) order
    either way. ``errors`` adds rows for task files that failed to load.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if mode == "vlm" and client_factory is None:
        raise ValueError("vlm mode needs a client_factory")

    work = [(task, trial) for task in tasks for trial in range(trials)]
    outcomes: list[tuple[bool, int, float]]
    if jobs > 1 and mode == "deterministic" and all(t.path for t in tasks):
        args = [(str(task.path), mode, seed + trial) for task, trial in work]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_trial_worker, args))
    else:
        outcomes = []
        for task, trial in work:
            client = client_factory(task, trial) if client_factory else None
            result = run_task(task, mode=mode, client=client, seed=seed + trial)
            outcomes.append((result.success, result.loops, result.wall_seconds))

    trial_records = [
        TrialRecord(task.id, trial, seed + trial, ok, loops, wall)
        for (task, trial), (ok, loops, wall) in zip(work, outcomes)
    ]
    rows = []
    for i, task in enumerate(tasks):
        chunk = trial_records[i * trials : (i + 1) * trials]
        successes = sum(1 for r in chunk if r.success)
        rows.append(
            TaskRow(
                task_id=task.id,
                level=task.level,
                title=task.title,
                trials=trials,
                accuracy=100.0 * successes / trials,
                mean_loops=sum(r.loops for r in chunk) / trials,
                mean_seconds=sum(r.wall_seconds for r in chunk) / trials,
            )
        )
    for task_id in sorted(errors or {}):
        rows.append(
            TaskRow(
                task_id=task_id, level=0, title="", trials=0,
                accuracy=0.0, mean_loops=0.0, mean_seconds=0.0,
                error=(errors or {})[task_id],
            )
        )
    return EvalReport(mode, trials, seed, tuple(rows), tuple(trial_records))


# --- report writers ---------------------------------------------------------------


def trials_tsv(report: EvalReport) -> str:
    """Per-trial outcomes without timing, so repeated runs are byte-identical."""
    lines = ["task\ttrial\tseed\tsuccess\tloops"]
    for r in report.trial_records:
        lines.append(f"{r.task_id}\t{r.trial}\t{r.seed}\t{int(r.success)}\t{r.loops}")
    return "\n".join(lines) + "\n"


def report_tsv(report: EvalReport) -> str:
    lines = ["task\tlevel\ttitle\ttrials\taccuracy_pct\tmean_loops\tmean_seconds\terror"]
    for row in report.rows:
        lines.append(
            f"{row.task_id}\t{row.level}\t{row.title}\t{row.trials}"
            f"\t{row.accuracy:.1f}\t{row.mean_loops:.2f}\t{row.mean_seconds:.3f}"
            f"\t{row.error or ''}"
        )
    return "\n".join(lines) + "\n"


def report_text(report: EvalReport) -> str:
    ok_rows = [r for r in report.rows if r.error is None]
    total = sum(r.trials for r in ok_rows)
    hits = sum(round(r.accuracy * r.trials / 100.0) for r in ok_rows)
    out = [
        f"placement evaluation: mode={report.mode} trials={report.trials} seed={report.seed}",
        f"overall accuracy: {100.0 * hits / total:.1f}% ({hits}/{total} trials)" if total else "no trials",
        "",
    ]
    for level in LEVELS:
        rows = [r for r in ok_rows if r.level == level]
        if not rows:
            continue
        header = f"Level {level}".ljust(22) + "".join(r.task_id.rjust(9) for r in rows)
        out.append(header)
        out.append("  accuracy (%)".ljust(22) + "".join(f"{r.accuracy:9.1f}" for r in rows))
        out.append("  judge loops".ljust(22) + "".join(f"{r.mean_loops:9.2f}" for r in rows))
        out.append("  seconds per trial".ljust(22) + "".join(f"{r.mean_seconds:9.3f}" for r in rows))
        out.append("")
    out.append("tasks:")
    for row in report.rows:
        if row.error is None:
            out.append(f"  {row.task_id}  {row.title}")
        else:
            out.append(f"  {row.task_id}  ERROR: {row.error}")
    return "\n".join(out) + "\n"


def write_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report.txt": out / "report.txt",
        "report.tsv": out / "report.tsv",
        "trials.tsv": out / "trials.tsv",
    }
    paths["report.txt"].write_text(report_text(report))
    paths["report.tsv"].write_text(report_tsv(report))
    paths["trials.tsv"].write_text(trials_tsv(report))
    return paths

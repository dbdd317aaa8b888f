"""Command-line entry point.

Exit codes: 0 success, 1 the run/evaluation itself failed (task did not pass,
accuracy below the requested bar), 2 usage or configuration error. All
randomness flows from --seed (default 0); outputs land under --out and
rerunning with identical inputs rewrites identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import cues, tasks as tasklib
from .energy import ConstraintSpec, compile_constraints
from .judge import judge
from .optimize import SolveConfig, solve
from .scene import SceneValidationError, UnknownObjectError
from .sceneio import load_scene, save_scene
from .tasks import TaskDef, evaluate, load_task, run_task, write_report
from .vlm import (
    HttpTransport,
    ReplayTransport,
    TranscriptLog,
    VlmClient,
    VlmConfig,
    make_stub_server,
    stub_replies_from_jsonl,
)

USAGE_ERROR = 2
RUN_FAILURE = 1


class CliError(Exception):
    """Usage/configuration problem; maps to exit code 2."""


def _load_constraints(path: Path) -> tuple[ConstraintSpec, ...]:
    doc = yaml.safe_load(path.read_text())
    if isinstance(doc, dict):
        doc = doc.get("constraints", [])
    if not isinstance(doc, list):
        raise CliError(f"{path}: expected a list of constraint mappings")
    return tuple(ConstraintSpec.from_mapping(d) for d in doc)


def _relation_pairs(args_pairs: Sequence[str]) -> list[tuple[str, str]]:
    pairs = []
    for raw in args_pairs:
        if ":" not in raw:
            raise CliError(f"--relation wants target:related, got {raw!r}")
        target, related = raw.split(":", 1)
        pairs.append((target, related))
    return pairs


def _task_path(ref: str) -> Path:
    path = Path(ref)
    if path.exists():
        return path
    for candidate in tasklib.builtin_task_paths():
        if load_task(candidate).id == ref:
            return candidate
    raise CliError(f"no task file or builtin task id matches {ref!r}")


def _resolve_task(ref: str) -> TaskDef:
    return load_task(_task_path(ref))


def _vlm_client(args: argparse.Namespace) -> VlmClient:
    config = VlmConfig(
        endpoint=args.endpoint,
        model=args.model,
        api_key_env=args.api_key_env,
    )
    transcript = TranscriptLog(args.transcript) if args.transcript else None
    if args.replay:
        return VlmClient(config, ReplayTransport.from_jsonl(args.replay), transcript)
    if not os.environ.get(config.api_key_env):
        raise CliError(
            f"vlm mode needs an API key: set the {config.api_key_env} environment "
            "variable (or pass --replay for offline transcripts)"
        )
    return VlmClient(config, HttpTransport(), transcript)


def _add_vlm_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--endpoint", default=VlmConfig.endpoint)
    parser.add_argument("--model", default=VlmConfig.model)
    parser.add_argument("--api-key-env", default=VlmConfig.api_key_env)
    parser.add_argument("--replay", type=Path, help="answer model calls from this transcript")
    parser.add_argument("--transcript", type=Path, help="log model calls to this file")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_render(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    options = cues.options_for(args.preset)
    pairs = _relation_pairs(args.relation or [])
    svg = cues.render_svg(scene, options, relation_pairs=pairs)
    out = _out_dir(args)
    svg_path = out / f"{Path(args.scene).stem}.svg"
    svg_path.write_text(svg)
    lines = cues.cue_text_lines(scene, options, relation_pairs=pairs)
    cue_path = out / f"{Path(args.scene).stem}.cues.txt"
    cue_path.write_text("\n".join(lines) + "\n")
    if args.porcelain:
        print(json.dumps({"svg": str(svg_path), "cues": str(cue_path)}, sort_keys=True))
    else:
        print(f"wrote {svg_path} and {cue_path}")
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    constraints = _load_constraints(args.constraints)
    problem = compile_constraints(scene, constraints)
    config = SolveConfig(
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=args.seed,
        target_epsilon=args.epsilon,
    )
    result = solve(scene, problem, args.target, config)
    solved = scene.with_object(
        scene.get(args.target).with_pose(result.position, result.orientation)
    )
    out = _out_dir(args)
    solved_path = out / f"{Path(args.scene).stem}.solved.yaml"
    save_scene(solved, solved_path)
    doc = {
        "target": args.target,
        "position": list(result.position.as_tuple()),
        "yaw": result.orientation.yaw,
        "energy": result.breakdown.total,
        "iterations": result.iterations_used,
        "converged": result.converged,
        "scene": str(solved_path),
    }
    if args.porcelain:
        print(json.dumps(doc, sort_keys=True))
    else:
        print(
            f"{args.target}: pos=({result.position.x:.4f}, {result.position.y:.4f}, "
            f"{result.position.z:.4f}) yaw={result.orientation.yaw:.2f} "
            f"energy={result.breakdown.total:.3e} iterations={result.iterations_used} "
            f"converged={result.converged}"
        )
        print(f"wrote {solved_path}")
    return 0 if result.converged else RUN_FAILURE


def _cmd_judge(args: argparse.Namespace) -> int:
    scene = load_scene(args.scene)
    constraints = _load_constraints(args.constraints)
    problem = compile_constraints(scene, constraints)
    verdict = judge(scene, problem, epsilon=args.epsilon, target_id=args.target)
    if args.porcelain:
        print(json.dumps(verdict.as_dict(), sort_keys=True))
    else:
        state = "PASS" if verdict.passed else "FAIL"
        print(f"{state} total={verdict.energy.total:.3e}")
        for v in verdict.violations:
            print(f"  {v.code}: {', '.join(v.subject_ids)} magnitude={v.magnitude:.4f}")
    return 0 if verdict.passed else RUN_FAILURE


def _cmd_run(args: argparse.Namespace) -> int:
    task = _resolve_task(args.task)
    client = _vlm_client(args) if args.mode == "vlm" else None
    result = run_task(task, mode=args.mode, client=client, seed=args.seed)
    out = _out_dir(args)
    final_path = out / f"{task.id}.final.yaml"
    save_scene(result.final_scene, final_path)
    doc: dict[str, Any] = {
        "task": task.id,
        "success": result.success,
        "loops": result.loops,
        "seconds": round(result.wall_seconds, 3),
        "scene": str(final_path),
    }
    if args.porcelain:
        print(json.dumps(doc, sort_keys=True))
    else:
        state = "success" if result.success else "FAILED"
        print(f"{task.id} {state}: loops={result.loops} seconds={result.wall_seconds:.3f}")
        print(f"wrote {final_path}")
    return 0 if result.success else RUN_FAILURE


def _cmd_eval(args: argparse.Namespace) -> int:
    if args.tasks:
        paths = [_task_path(ref) for ref in args.tasks]
    else:
        paths = tasklib.builtin_task_paths()
    if not paths:
        raise CliError("no task files found")
    loaded: list[TaskDef] = []
    errors: dict[str, str] = {}
    for p in paths:
        try:
            loaded.append(load_task(p))
        except (SceneValidationError, OSError, yaml.YAMLError) as exc:
            errors[p.stem] = str(exc)
    client_factory = None
    if args.mode == "vlm":
        client = _vlm_client(args)
        client_factory = lambda task, trial: client  # noqa: E731 - one shared client
    report = evaluate(
        loaded,
        mode=args.mode,
        trials=args.trials,
        seed=args.seed,
        jobs=args.jobs,
        client_factory=client_factory,
        errors=errors,
    )
    out = _out_dir(args)
    write_report(report, out)
    if args.porcelain:
        sys.stdout.write(tasklib.report_tsv(report))
    else:
        sys.stdout.write(tasklib.report_text(report))
        print(f"reports written to {out}")
    if errors:
        return RUN_FAILURE
    if args.require_accuracy is not None:
        worst = min((row.accuracy for row in report.rows), default=0.0)
        if worst < args.require_accuracy:
            return RUN_FAILURE
    return 0


def _cmd_stub_serve(args: argparse.Namespace) -> int:
    replies = stub_replies_from_jsonl(args.replay)
    server = make_stub_server(replies, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving {len(replies)} replies on http://{host}:{port}", flush=True)
    if args.max_requests is not None:
        for _ in range(args.max_requests):
            server.handle_request()
        server.server_close()
        return 0
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenelayout",
        description="Context-aware object placement: solve, judge, render and evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="write an annotated SVG and cue text for a scene")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--preset", default=cues.DEFAULT_PRESET, choices=sorted(cues.PRESETS))
    p.add_argument("--relation", action="append", metavar="TARGET:RELATED")
    p.add_argument("--out", type=Path, default=Path("out"), metavar="DIR", help="output directory")
    p.add_argument("--porcelain", action="store_true")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("solve", help="optimize one object's pose against constraints")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--constraints", type=Path, required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iterations", type=int, default=SolveConfig.max_iterations)
    p.add_argument("--restarts", type=int, default=SolveConfig.restarts)
    p.add_argument("--epsilon", type=float, default=SolveConfig.target_epsilon)
    p.add_argument("--out", type=Path, default=Path("out"), metavar="DIR", help="output directory")
    p.add_argument("--porcelain", action="store_true")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("judge", help="score a scene against constraints")
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--constraints", type=Path, required=True)
    p.add_argument("--target", default=None)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--porcelain", action="store_true")
    p.set_defaults(func=_cmd_judge)

    p = sub.add_parser("run", help="run one task end to end")
    p.add_argument("--task", required=True, help="task file path or builtin id (e.g. L2T2)")
    p.add_argument("--mode", choices=("deterministic", "vlm"), default="deterministic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out"), metavar="DIR", help="output directory")
    p.add_argument("--porcelain", action="store_true")
    _add_vlm_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="run the task suite and write reports")
    p.add_argument("--tasks", nargs="*", help="task files (default: builtin suite)")
    p.add_argument("--mode", choices=("deterministic", "vlm"), default="deterministic")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--require-accuracy", type=float, default=None, metavar="PCT")
    p.add_argument("--out", type=Path, default=Path("out"), metavar="DIR", help="output directory")
    p.add_argument("--porcelain", action="store_true")
    _add_vlm_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stub-serve", help="serve canned chat replies over HTTP")
    p.add_argument("--replay", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--max-requests", type=int, default=None)
    p.set_defaults(func=_cmd_stub_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (SceneValidationError, UnknownObjectError, FileNotFoundError, KeyError) as exc:
        # str(KeyError) wraps the message in repr quotes; unwrap for display.
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return USAGE_ERROR
    except yaml.YAMLError as exc:
        print(f"error: invalid YAML: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())

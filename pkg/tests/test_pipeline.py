"""End-to-end tests for the instruction loop in both modes.

Deterministic runs use the solver plus verbatim judge corrections; model
runs are driven by scripted transports so every prompt and reply is
inspectable without a network.
"""

from __future__ import annotations

import json

import pytest

from scenelayout.energy import ConstraintSpec, PlacementProblem, compile_constraints
from scenelayout.optimize import SolveConfig
from scenelayout.pipeline import Instruction, RunRecord, relation_pairs_of, run
from scenelayout.scene import (
    AssetSpec,
    Scene,
    SceneValidationError,
    Vec3,
    instantiate,
)
from scenelayout.vlm import VlmClient, VlmConfig

from .conftest import box

TABLE_ASSET = AssetSpec(asset_id="table", half_extents=Vec3(0.8, 0.375, 0.5))
CUP_ASSET = AssetSpec(asset_id="cup", half_extents=Vec3(0.04, 0.05, 0.04))


def world() -> Scene:
    table = instantiate(TABLE_ASSET, "table", Vec3(0.0, 0.375, 0.0))
    return Scene((table,), (TABLE_ASSET, CUP_ASSET))


def on_table() -> list[ConstraintSpec]:
    return [ConstraintSpec.from_mapping({"kind": "on", "subject": "cup", "related": "table"})]


def tug_of_war() -> list[ConstraintSpec]:
    return [
        ConstraintSpec.from_mapping(
            {"kind": "at_offset", "subject": "cup", "related": "table", "offset": [3.0, 0.0, 0.0]}
        ),
        ConstraintSpec.from_mapping(
            {"kind": "at_offset", "subject": "cup", "related": "table", "offset": [-3.0, 0.0, 0.0]}
        ),
    ]


PLACE_CUP = Instruction(
    "put the cup on the table",
    "cup",
    asset_id="cup",
    spawn_position=Vec3(2.0, 0.05, 2.0),
)

CRIPPLED = SolveConfig(
    max_iterations=1, restarts=1, initial_step=1e-4, yaw_step_deg=1.0, use_anchor_init=False
)


class ScriptedTransport:
    """Replays canned step/content pairs and records every request."""

    def __init__(self, entries):
        self.entries = list(entries)
        self.calls = []

    def send(self, step, messages, config):
        assert self.entries, f"script ran out of replies at step {step!r}"
        entry = self.entries.pop(0)
        assert entry["step"] == step, f"script expected {entry['step']!r}, got {step!r}"
        self.calls.append((step, [dict(m) for m in messages]))
        return entry["content"]


def scripted_client(entries) -> tuple[VlmClient, ScriptedTransport]:
    transport = ScriptedTransport(entries)
    return VlmClient(VlmConfig(), transport=transport), transport


class TestDeterministicMode:
    def test_single_loop_when_solver_lands_the_pose(self):
        scene = world()
        record = run(scene, PLACE_CUP, on_table())
        assert record.success
        assert record.judge_loops == 1 and len(record.verdicts) == 1
        assert record.verdicts[0].passed
        cup = record.final_scene.get("cup")
        assert cup.position.y == pytest.approx(0.8, abs=1e-3)
        assert abs(cup.position.x) <= 0.8 and abs(cup.position.z) <= 0.5
        assert record.wall_seconds > 0.0
        assert "cup" not in scene

    def test_judge_corrections_repair_a_crippled_solver(self):
        record = run(world(), PLACE_CUP, on_table(), solve_config=CRIPPLED)
        assert record.success
        assert record.judge_loops == 2
        assert not record.verdicts[0].passed and record.verdicts[1].passed
        cup = record.final_scene.get("cup")
        assert cup.position.y == pytest.approx(0.8, abs=1e-9)

    def test_contradictory_relations_exhaust_the_loop_budget(self):
        record = run(world(), PLACE_CUP, tug_of_war(), max_loops=4)
        assert not record.success
        assert record.judge_loops == 4 and len(record.verdicts) == 4
        assert not any(v.passed for v in record.verdicts)

    def test_max_loops_one_judges_once_without_repair(self):
        record = run(world(), PLACE_CUP, tug_of_war(), max_loops=1)
        assert record.judge_loops == 1 and not record.success

    def test_loose_epsilon_passes_immediately(self):
        record = run(world(), PLACE_CUP, on_table(), solve_config=CRIPPLED, epsilon=1e6)
        assert record.success and record.judge_loops == 1

    def test_existing_target_is_reposed_not_respawned(self):
        scene = world().spawn("cup", "cup", Vec3(5.0, 0.05, 5.0))
        record = run(scene, Instruction("move the cup onto the table", "cup"), on_table())
        assert record.success
        assert record.final_scene.object_ids().count("cup") == 1

    def test_unknown_target_without_asset_raises(self):
        instruction = Instruction("place the ghost", "ghost")
        with pytest.raises(SceneValidationError, match="ghost"):
            run(world(), instruction, on_table())

    def test_argument_validation(self):
        with pytest.raises(ValueError, match="mode"):
            run(world(), PLACE_CUP, on_table(), mode="telepathy")
        with pytest.raises(ValueError, match="client"):
            run(world(), PLACE_CUP, on_table(), mode="vlm")
        with pytest.raises(ValueError, match="max_loops"):
            run(world(), PLACE_CUP, on_table(), max_loops=0)

    def test_record_invariants_hold_either_way(self):
        for constraints, max_loops in ((on_table(), 8), (tug_of_war(), 3)):
            record = run(world(), PLACE_CUP, constraints, max_loops=max_loops)
            assert record.judge_loops == len(record.verdicts) <= max_loops
            assert record.success == record.verdicts[-1].passed


class TestVlmMode:
    def test_worker_pose_is_applied_and_judged(self):
        client, transport = scripted_client(
            [
                {
                    "step": "generate",
                    "content": '{"object_id": "cup", "position": [0.5, 0.9, 0.2], "yaw": 0.0}',
                },
                {"step": "worker", "content": '{"position": [0.0, 0.8, 0.0], "yaw": 0.0}'},
            ]
        )
        record = run(world(), PLACE_CUP, on_table(), mode="vlm", client=client)
        assert record.success and record.judge_loops == 1
        assert record.final_scene.get("cup").position.as_tuple() == (0.0, 0.8, 0.0)
        assert transport.entries == []
        first_worker = transport.calls[1][1][1]["content"]
        assert "[]" in first_worker
        assert "Annotated render (SVG, base64):" in first_worker

    def test_generate_for_the_wrong_object_is_ignored(self):
        client, _ = scripted_client(
            [
                {
                    "step": "generate",
                    "content": '{"object_id": "table", "position": [9.0, 9.0, 9.0]}',
                },
                {"step": "worker", "content": '{"position": [0.0, 0.8, 0.0], "yaw": 0.0}'},
            ]
        )
        record = run(world(), PLACE_CUP, on_table(), mode="vlm", client=client)
        assert record.success
        assert record.final_scene.get("table").position.as_tuple() == (0.0, 0.375, 0.0)

    def test_failing_verdict_feeds_violations_back_to_the_worker(self):
        client, transport = scripted_client(
            [
                {"step": "generate", "content": '{"object_id": "cup"}'},
                {"step": "worker", "content": '{"position": [0.0, 2.0, 0.0], "yaw": 0.0}'},
                {"step": "worker", "content": '{"position": [0.0, 0.8, 0.0], "yaw": 0.0}'},
            ]
        )
        record = run(world(), PLACE_CUP, on_table(), mode="vlm", client=client)
        assert record.success and record.judge_loops == 2
        assert not record.verdicts[0].passed and record.verdicts[1].passed
        repair_prompt = transport.calls[2][1][1]["content"]
        assert '"code": "floating"' in repair_prompt
        assert "Annotated render (SVG, base64):" in repair_prompt
        expected_feedback = json.dumps(
            [v.as_dict() for v in record.verdicts[0].violations], sort_keys=True
        )
        assert expected_feedback in repair_prompt

    def test_stubborn_worker_exhausts_loops(self):
        bad = {"step": "worker", "content": '{"position": [0.0, 3.0, 0.0], "yaw": 0.0}'}
        client, transport = scripted_client(
            [{"step": "generate", "content": '{"object_id": "cup"}'}, bad, dict(bad), dict(bad)]
        )
        record = run(world(), PLACE_CUP, on_table(), mode="vlm", client=client, max_loops=3)
        assert not record.success
        assert record.judge_loops == 3
        assert [step for step, _ in transport.calls] == [
            "generate", "worker", "worker", "worker"
        ]


class TestRelationPairs:
    def test_dedupes_and_keeps_first_seen_order(self):
        scene = Scene.from_objects(
            box("a"), box("b", position=(2.0, 0.5, 0.0)), box("c", position=(0.0, 0.5, 2.0)),
            box("d", position=(2.0, 0.5, 2.0)),
        )
        constraints = [
            ConstraintSpec.from_mapping(
                {"kind": "face_toward", "subject": "a", "related": "b"}
            ),
            ConstraintSpec.from_mapping(
                {"kind": "at_offset", "subject": "a", "related": "b", "offset": [2.0, 0.0, 0.0]}
            ),
            ConstraintSpec.from_mapping(
                {"kind": "at_offset", "subject": "c", "related": "d", "offset": [2.0, 0.0, 0.0]}
            ),
        ]
        problem = compile_constraints(scene, constraints)
        assert relation_pairs_of(problem) == (("a", "b"), ("c", "d"))

    def test_empty_problem_has_no_pairs(self):
        assert relation_pairs_of(PlacementProblem()) == ()

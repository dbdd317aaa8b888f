"""Judge tests: verdict semantics, violation codes, and correction quality.

Every code is constructed from a minimal scene, and every suggested
correction is applied back to the scene to prove it actually clears the
violation it annotates, not just that it points somewhere plausible.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from scenelayout.energy import (
    EQUAL_SPACING,
    IN_FRONT_OF,
    MUTUAL_FACING,
    ORDERED_ROW,
    REGION_PLACEMENT,
    SIDE_OF,
    STACK_ORDER,
    SYMMETRIC_PAIR,
    AffordanceSpec,
    CultureSpec,
    PairRelation,
    PlacementProblem,
    SocialSpec,
    total_energy,
)
from scenelayout.geom import convex_hull
from scenelayout.judge import (
    CODE_COLLISION,
    CODE_DISTANCE,
    CODE_FLOATING,
    CODE_ORDER,
    CODE_ORIENTATION,
    CODE_REGION,
    CODE_SIDE,
    CODE_STACKING,
    CORRECTION_MARGIN,
    Verdict,
    Violation,
    judge,
)
from scenelayout.optimize import apply_correction
from scenelayout.scene import Vec3

from .conftest import box, scene_of


def apply_delta(scene, target_id, violation):
    assert violation.suggested_delta is not None
    move, yaw = violation.suggested_delta
    return apply_correction(scene, target_id, move, yaw)


class TestVerdictSemantics:
    def test_pass_iff_no_violations_iff_total_below_epsilon(self):
        rel = PairRelation("cup", "table", Vec3(0.5, 0.0, 0.0))
        problem = PlacementProblem(relations=(rel,))
        table = box("table", half=(0.8, 0.375, 0.5), position=(0.0, 0.375, 0.0))

        good = scene_of(table, box("cup", position=(0.5, 0.375, 0.0)))
        verdict = judge(good, problem)
        assert verdict.passed and verdict.violations == ()
        assert verdict.energy.total <= 1e-6

        bad = scene_of(table, box("cup", position=(1.5, 0.375, 0.0)))
        verdict = judge(bad, problem)
        assert not verdict.passed and len(verdict.violations) >= 1
        assert verdict.energy.total > 1e-6

    def test_three_way_agreement_on_random_scenes(self):
        rng = np.random.default_rng(11)
        epsilon = 0.1
        saw_pass = saw_fail = False
        for _ in range(50):
            offset = Vec3(*rng.uniform(-0.4, 0.4, 3))
            rel = PairRelation("a", "b", offset)
            problem = PlacementProblem(relations=(rel,))
            scene = scene_of(
                box("a", position=tuple(rng.uniform(-1, 1, 3))),
                box("b", position=tuple(rng.uniform(-1, 1, 3))),
            )
            verdict = judge(scene, problem, epsilon=epsilon)
            total = total_energy(scene, problem).total
            assert verdict.passed == (total <= epsilon) == (not verdict.violations)
            assert verdict.energy.total == total
            saw_pass |= verdict.passed
            saw_fail |= not verdict.passed
        assert saw_pass and saw_fail

    def test_epsilon_boundary_is_inclusive(self):
        rel = PairRelation("a", "b", Vec3(0.0, 0.0, 0.0))
        problem = PlacementProblem(relations=(rel,))
        scene = scene_of(box("a", position=(0.3, 0.5, 0.4)), box("b", position=(0.0, 0.5, 0.0)))
        total = total_energy(scene, problem).total
        assert total == pytest.approx(0.25, abs=1e-12)
        assert judge(scene, problem, epsilon=total).passed
        assert not judge(scene, problem, epsilon=total * (1 - 1e-9)).passed

    def test_items_below_tau_are_not_reported(self):
        big = PairRelation("a", "anchor", Vec3(1.0, 0.0, 0.0))
        tiny = PairRelation("b", "anchor", Vec3(1e-5, 0.0, 0.0))
        problem = PlacementProblem(relations=(big, tiny))
        scene = scene_of(
            box("anchor", position=(0.0, 0.5, 0.0)),
            box("a", position=(0.0, 0.5, 0.0)),
            box("b", position=(0.0, 0.5, 0.0)),
        )
        verdict = judge(scene, problem)
        assert [v.subject_ids for v in verdict.violations] == [("a", "anchor")]

    def test_violation_rejects_bad_inputs(self):
        with pytest.raises(ValueError, match="unknown violation code"):
            Violation("nonsense", ("a",), 1.0)
        with pytest.raises(ValueError, match="magnitude"):
            Violation(CODE_DISTANCE, ("a",), 0.0)
        with pytest.raises(ValueError, match="magnitude"):
            Violation(CODE_DISTANCE, ("a",), -2.0)

    def test_violation_dict_round_trip(self):
        v = Violation(CODE_SIDE, ("a", "b"), 0.5, (Vec3(0.1, 0.0, -0.2), 15.0))
        assert Violation.from_dict(v.as_dict()) == v
        bare = Violation(CODE_ORDER, ("a", "b", "c"), 2.0)
        assert Violation.from_dict(bare.as_dict()) == bare

    def test_verdict_dict_shape(self):
        rel = PairRelation("a", "b", Vec3(1.0, 0.0, 0.0))
        scene = scene_of(box("a"), box("b"))
        doc = judge(scene, PlacementProblem(relations=(rel,)), target_id="a").as_dict()
        assert doc["passed"] is False
        assert doc["violations"][0]["code"] == CODE_DISTANCE
        assert set(doc["energy"]) == {
            "collision", "distance", "affordance", "social", "culture", "total"
        }


class TestCollisionCode:
    def problem(self):
        return PlacementProblem(collision_pairs=(("a", "b"),))

    def test_overlap_reports_area_and_correction_separates(self):
        scene = scene_of(box("a"), box("b", position=(0.5, 0.5, 0.0)))
        verdict = judge(scene, self.problem(), target_id="b")
        [v] = verdict.violations
        assert v.code == CODE_COLLISION and v.subject_ids == ("a", "b")
        assert v.magnitude == pytest.approx(0.5, abs=1e-9)
        fixed = apply_delta(scene, "b", v)
        assert judge(fixed, self.problem(), target_id="b").passed

    def test_correction_works_from_either_side(self):
        scene = scene_of(box("a"), box("b", position=(0.5, 0.5, 0.0)))
        [v] = judge(scene, self.problem(), target_id="a").violations
        fixed = apply_delta(scene, "a", v)
        assert judge(fixed, self.problem(), target_id="a").passed

    def test_dilated_clearance_counts_as_collision(self):
        problem = PlacementProblem(collision_pairs=(("a", "b"),), clearance=0.2)
        scene = scene_of(box("a"), box("b", position=(1.2, 0.5, 0.0)))
        verdict = judge(scene, problem, target_id="b")
        [v] = verdict.violations
        assert v.code == CODE_COLLISION
        fixed = apply_delta(scene, "b", v)
        assert judge(fixed, problem, target_id="b").passed


class TestDistanceAndFloating:
    def on_table(self):
        rel = PairRelation(
            "cup", "table", Vec3(0.0, 0.425, 0.0), free=(True, False, True), is_support=True
        )
        return PlacementProblem(relations=(rel,))

    def scene_with_cup_at(self, y):
        return scene_of(
            box("table", half=(0.8, 0.375, 0.5), position=(0.0, 0.375, 0.0)),
            box("cup", half=(0.04, 0.05, 0.04), position=(0.0, y, 0.0)),
        )

    def test_wrong_offset_reports_euclidean_magnitude(self):
        rel = PairRelation("a", "b", Vec3(0.5, 0.0, 0.6))
        problem = PlacementProblem(relations=(rel,))
        scene = scene_of(box("b", position=(0.0, 0.5, 0.0)), box("a", position=(1.0, 0.5, 1.0)))
        [v] = judge(scene, problem, target_id="a").violations
        assert v.code == CODE_DISTANCE and v.subject_ids == ("a", "b")
        assert v.magnitude == pytest.approx(math.hypot(0.5, 0.4), abs=1e-12)
        fixed = apply_delta(scene, "a", v)
        assert judge(fixed, problem, target_id="a").passed

    def test_hovering_above_support_reports_floating(self):
        scene = self.scene_with_cup_at(1.3)
        [v] = judge(scene, self.on_table(), target_id="cup").violations
        assert v.code == CODE_FLOATING
        assert v.magnitude == pytest.approx(0.5, abs=1e-12)
        move, yaw = v.suggested_delta
        assert move.as_tuple() == pytest.approx((0.0, -0.5, 0.0), abs=1e-12) and yaw == 0.0
        fixed = apply_delta(scene, "cup", v)
        assert judge(fixed, self.on_table(), target_id="cup").passed

    def test_gap_within_resting_tolerance_is_distance_not_floating(self):
        # Table is 0.75 tall, so the resting tolerance is 0.0075.
        scene = self.scene_with_cup_at(0.805)
        [v] = judge(scene, self.on_table(), target_id="cup").violations
        assert v.code == CODE_DISTANCE
        assert v.magnitude == pytest.approx(0.005, abs=1e-12)

    def test_related_object_as_target_gets_no_delta(self):
        scene = self.scene_with_cup_at(1.3)
        [v] = judge(scene, self.on_table(), target_id="table").violations
        assert v.code == CODE_FLOATING and v.suggested_delta is None


class TestOrientationCode:
    def test_face_toward_correction_snaps_onto_bearing(self):
        spec = AffordanceSpec("chair", "desk", mode="face_toward")
        problem = PlacementProblem(affordances=(spec,))
        scene = scene_of(box("desk", position=(0.0, 0.5, 2.0)), box("chair", yaw=90.0))
        [v] = judge(scene, problem, target_id="chair").violations
        assert v.code == CODE_ORIENTATION and v.subject_ids == ("chair", "desk")
        assert v.magnitude == pytest.approx(75.0, abs=1e-9)
        move, yaw = v.suggested_delta
        assert move.norm() == 0.0 and yaw == pytest.approx(-90.0, abs=1e-9)
        fixed = apply_delta(scene, "chair", v)
        assert judge(fixed, problem, target_id="chair").passed

    def test_face_away_correction(self):
        spec = AffordanceSpec("statue", "gate", mode="face_away")
        problem = PlacementProblem(affordances=(spec,))
        scene = scene_of(box("gate", position=(0.0, 0.5, 2.0)), box("statue"))
        [v] = judge(scene, problem, target_id="statue").violations
        assert v.code == CODE_ORIENTATION
        fixed = apply_delta(scene, "statue", v)
        assert judge(fixed, problem, target_id="statue").passed

    def test_face_same_direction_correction_cancels_offset(self):
        spec = AffordanceSpec("doll_a", "doll_b", mode="face_same_direction")
        problem = PlacementProblem(affordances=(spec,))
        scene = scene_of(box("doll_b", position=(1.0, 0.5, 0.0), yaw=30.0), box("doll_a", yaw=100.0))
        [v] = judge(scene, problem, target_id="doll_a").violations
        assert v.code == CODE_ORIENTATION
        fixed = apply_delta(scene, "doll_a", v)
        assert judge(fixed, problem, target_id="doll_a").passed

    def test_mutual_facing_reports_orientation(self):
        spec = SocialSpec(MUTUAL_FACING, ("p", "q"))
        problem = PlacementProblem(social=(spec,))
        scene = scene_of(
            box("p", yaw=90.0), box("q", position=(0.0, 0.5, 2.0), yaw=180.0)
        )
        [v] = judge(scene, problem, target_id="p").violations
        assert v.code == CODE_ORIENTATION
        assert v.magnitude == pytest.approx(75.0, abs=1e-9)
        move, yaw = v.suggested_delta
        assert yaw == pytest.approx(-90.0, abs=1e-9)
        fixed = apply_delta(scene, "p", v)
        assert judge(fixed, problem, target_id="p").passed


class TestSideCode:
    def test_wrong_side_correction_crosses_the_plane(self):
        spec = SocialSpec(SIDE_OF, ("guard", "gate"), side="right")
        problem = PlacementProblem(social=(spec,))
        scene = scene_of(box("gate"), box("guard", position=(-0.5, 0.5, 0.0)))
        [v] = judge(scene, problem, target_id="guard").violations
        assert v.code == CODE_SIDE and v.magnitude == pytest.approx(0.5, abs=1e-12)
        move, _ = v.suggested_delta
        assert move.as_tuple() == pytest.approx((0.5 + CORRECTION_MARGIN, 0.0, 0.0), abs=1e-9)
        fixed = apply_delta(scene, "guard", v)
        assert judge(fixed, problem, target_id="guard").passed

    def test_side_axis_follows_related_heading(self):
        spec = SocialSpec(SIDE_OF, ("guard", "gate"), side="right")
        problem = PlacementProblem(social=(spec,))
        # Gate turned 180: its right is now world -x.
        scene = scene_of(
            box("gate", yaw=180.0), box("guard", position=(0.5, 0.5, 0.0))
        )
        [v] = judge(scene, problem, target_id="guard").violations
        fixed = apply_delta(scene, "guard", v)
        assert judge(fixed, problem, target_id="guard").passed
        assert fixed.get("guard").position.x < 0.0

    def test_behind_reports_side_and_correction_moves_forward(self):
        spec = SocialSpec(IN_FRONT_OF, ("visitor", "shrine"))
        problem = PlacementProblem(social=(spec,))
        scene = scene_of(box("shrine"), box("visitor", position=(0.0, 0.5, -0.3)))
        [v] = judge(scene, problem, target_id="visitor").violations
        assert v.code == CODE_SIDE and v.magnitude == pytest.approx(0.3, abs=1e-12)
        move, _ = v.suggested_delta
        assert move.as_tuple() == pytest.approx((0.0, 0.0, 0.3 + CORRECTION_MARGIN), abs=1e-9)
        fixed = apply_delta(scene, "visitor", v)
        assert judge(fixed, problem, target_id="visitor").passed


class TestOrderCode:
    def row_scene(self, xs):
        return scene_of(
            box("a", position=(xs[0], 0.5, 0.0)),
            box("b", position=(xs[1], 0.5, 0.0)),
            box("c", position=(xs[2], 0.5, 0.0)),
        )

    def test_unequal_spacing_middle_correction_reaches_midpoint(self):
        spec = SocialSpec(EQUAL_SPACING, ("a", "b", "c"), axis_deg=90.0)
        problem = PlacementProblem(social=(spec,))
        scene = self.row_scene([0.0, 0.5, 2.0])
        [v] = judge(scene, problem, target_id="b").violations
        assert v.code == CODE_ORDER and v.subject_ids == ("a", "b", "c")
        assert v.magnitude == pytest.approx(np.var([0.5, 1.5]), abs=1e-12)
        move, _ = v.suggested_delta
        assert move.as_tuple() == pytest.approx((0.5, 0.0, 0.0), abs=1e-12)
        fixed = apply_delta(scene, "b", v)
        assert judge(fixed, problem, target_id="b").passed

    def test_out_of_order_row_reports_order(self):
        spec = SocialSpec(ORDERED_ROW, ("a", "b", "c"), axis_deg=90.0)
        problem = PlacementProblem(social=(spec,))
        [v] = judge(self.row_scene([1.0, 0.0, 2.0]), problem, target_id="b").violations
        assert v.code == CODE_ORDER and v.magnitude > 1.0

    def test_row_end_target_gets_no_delta(self):
        spec = SocialSpec(EQUAL_SPACING, ("a", "b", "c"), axis_deg=90.0)
        problem = PlacementProblem(social=(spec,))
        [v] = judge(self.row_scene([0.0, 0.5, 2.0]), problem, target_id="a").violations
        assert v.code == CODE_ORDER and v.suggested_delta is None


class TestStackingCode:
    def problem(self):
        spec = CultureSpec(STACK_ORDER, ("base", "top"), center_tolerance=0.02)
        return PlacementProblem(culture=(spec,))

    def test_offcenter_reports_stacking_and_recentering_fixes(self):
        scene = scene_of(
            box("base", half=(0.5, 0.1, 0.5), position=(0.0, 0.1, 0.0)),
            box("top", half=(0.2, 0.075, 0.2), position=(0.3, 0.15, 0.0)),
        )
        [v] = judge(scene, self.problem(), target_id="top").violations
        assert v.code == CODE_STACKING
        assert v.magnitude == pytest.approx(0.28, abs=1e-12)
        fixed = apply_delta(scene, "top", v)
        assert judge(fixed, self.problem(), target_id="top").passed
        assert fixed.get("top").position.y == pytest.approx(0.275, abs=1e-12)

    def test_inverted_order_counts_a_unit_fault(self):
        scene = scene_of(
            box("base", half=(0.5, 0.1, 0.5), position=(0.0, 0.1, 0.0)),
            box("top", half=(0.2, 0.075, 0.2), position=(0.0, 0.05, 0.0)),
        )
        [v] = judge(scene, self.problem(), target_id="top").violations
        assert v.code == CODE_STACKING and v.magnitude >= 1.0
        fixed = apply_delta(scene, "top", v)
        assert judge(fixed, self.problem(), target_id="top").passed

    def test_bottom_of_stack_gets_no_delta(self):
        scene = scene_of(
            box("base", half=(0.5, 0.1, 0.5), position=(0.0, 0.1, 0.0)),
            box("top", half=(0.2, 0.075, 0.2), position=(0.3, 0.15, 0.0)),
        )
        [v] = judge(scene, self.problem(), target_id="base").violations
        assert v.code == CODE_STACKING and v.suggested_delta is None


class TestRegionCodes:
    def test_outside_region_correction_moves_just_inside(self):
        region = convex_hull([(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)])
        spec = CultureSpec(REGION_PLACEMENT, ("ball",), region=region)
        problem = PlacementProblem(culture=(spec,))
        scene = scene_of(box("ball", position=(3.0, 0.5, 1.0)))
        [v] = judge(scene, problem, target_id="ball").violations
        assert v.code == CODE_REGION and v.magnitude == pytest.approx(1.0, abs=1e-12)
        move, _ = v.suggested_delta
        assert move.as_tuple() == pytest.approx((-1.0 - CORRECTION_MARGIN, 0.0, 0.0), abs=1e-9)
        fixed = apply_delta(scene, "ball", v)
        assert judge(fixed, problem, target_id="ball").passed

    def test_asymmetric_pair_correction_lands_on_mirror_image(self):
        spec = CultureSpec(
            SYMMETRIC_PAIR, ("left", "right"), axis_deg=0.0, axis_point=(0.0, 0.0)
        )
        problem = PlacementProblem(culture=(spec,))
        scene = scene_of(
            box("left", position=(-1.0, 0.5, 2.0)),
            box("right", position=(1.2, 0.5, 2.0)),
        )
        [v] = judge(scene, problem, target_id="right").violations
        assert v.code == CODE_REGION and v.magnitude == pytest.approx(0.2, abs=1e-12)
        move, _ = v.suggested_delta
        assert move.as_tuple() == pytest.approx((-0.2, 0.0, 0.0), abs=1e-9)
        fixed = apply_delta(scene, "right", v)
        assert judge(fixed, problem, target_id="right").passed


class TestDeltaScoping:
    def test_no_target_means_no_deltas(self):
        problem = PlacementProblem(
            relations=(PairRelation("a", "b", Vec3(1.0, 0.0, 0.0)),),
            collision_pairs=(("a", "b"),),
        )
        scene = scene_of(box("a"), box("b", position=(0.2, 0.5, 0.0)))
        verdict = judge(scene, problem)
        assert verdict.violations
        assert all(v.suggested_delta is None for v in verdict.violations)

    def test_bystander_target_gets_no_deltas(self):
        problem = PlacementProblem(collision_pairs=(("a", "b"),))
        scene = scene_of(
            box("a"), box("b", position=(0.2, 0.5, 0.0)), box("c", position=(5.0, 0.5, 0.0))
        )
        [v] = judge(scene, problem, target_id="c").violations
        assert v.suggested_delta is None

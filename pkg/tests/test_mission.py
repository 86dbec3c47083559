import io
import json
import math

import pytest

from pursuitsim.config import SimConfig
from pursuitsim.geometry import Vec3, ZERO3
from pursuitsim.mission import (
    Arena,
    BalloonSpec,
    FaultSpec,
    MissionMode,
    MissionParams,
    MissionState,
    Scenario,
    ValidityGate,
    lawnmower_legs,
    lawnmower_plan,
    load_scenario,
    los_angles,
    recovery_stitch,
    run_mission,
    square_search_plan,
    task1_step,
    task2_step,
    validate_detection,
)
from pursuitsim.perception import Detection
from pursuitsim.vehicle import UavState


SIM = SimConfig()


class TestLawnmower:
    def test_leg_count_for_tuned_sweep(self):
        legs = lawnmower_legs(Arena(), 6.0)
        assert len(legs) == math.ceil(40 / 6) == 7

    def test_all_waypoints_at_altitude(self):
        plan = lawnmower_plan(Arena(), 6.0, 2.4, 2.0)
        cruise = [wp for wp in plan.waypoints if abs(wp.position.z - 2.4) < 1e-9]
        # everything except takeoff/landing endpoints flies the set altitude
        assert len(cruise) >= len(plan.waypoints) - 2

    def test_coverage(self):
        # every arena point must lie within half a sweep of some leg offset
        arena = Arena()
        sweep = 6.0
        legs = lawnmower_legs(arena, sweep)
        for i in range(401):
            y = arena.width * i / 400
            assert min(abs(y - leg) for leg in legs) <= sweep / 2 + 1e-9

    def test_reverse_pass_is_shifted(self):
        plan = lawnmower_plan(Arena(), 6.0, 2.4, 2.0)
        ys = {round(wp.position.y, 6) for wp in plan.waypoints}
        legs = lawnmower_legs(Arena(), 6.0)
        for leg in legs:
            assert round(leg, 6) in ys
            if leg + 3.0 <= 40.0:
                assert round(leg + 3.0, 6) in ys

    def test_degenerate_single_leg(self):
        legs = lawnmower_legs(Arena(), 40.0)
        assert len(legs) == 1

    def test_invalid_sweep(self):
        with pytest.raises(ValueError):
            lawnmower_plan(Arena(), 0.0, 2.4, 2.0)


class TestSquareSearch:
    def test_constant_altitude_and_yaw(self):
        plan = square_search_plan(Arena(), 11.0, 1.0)
        for wp in plan.waypoints:
            assert wp.position.z == 11.0
            assert wp.yaw == 0.0

    def test_centered_and_closed(self):
        arena = Arena()
        plan = square_search_plan(arena, 11.0, 1.0, side=12.0)
        xs = [wp.position.x for wp in plan.waypoints]
        ys = [wp.position.y for wp in plan.waypoints]
        assert abs((max(xs) + min(xs)) / 2 - arena.center.x) < 1e-6
        assert abs((max(ys) + min(ys)) / 2 - arena.center.y) < 1e-6
        first, last = plan.waypoints[0], plan.waypoints[-1]
        assert (first.position - last.position).norm() < 1e-9

    def test_must_clear_ceiling(self):
        with pytest.raises(ValueError):
            square_search_plan(Arena(ceiling=5.0), 4.0, 1.0)


class TestValidityGate:
    def make_det(self, bbox, centroid):
        return Detection(centroid=centroid, pixel_count=10, bbox=bbox)

    def test_area_rule(self):
        gate = ValidityGate(min_bbox_area_fraction=0.01)
        det = self.make_det((0, 0, 59, 59), (30.0, 30.0))  # 60x60 on 680x480
        assert 3600 / (680 * 480) > 0.01
        assert validate_detection(det, gate, 680, 480, task=1)

    def test_bottom_exclusion_for_task2(self):
        gate = ValidityGate(min_bbox_area_fraction=0.0)
        det = self.make_det((0, 0, 99, 99), (50.0, 0.85 * 480))
        assert not validate_detection(det, gate, 680, 480, task=2)
        assert validate_detection(det, gate, 680, 480, task=1)

    def test_exact_threshold_rejected(self):
        frac = 3600 / (680.0 * 480.0)
        gate = ValidityGate(min_bbox_area_fraction=frac)
        det = self.make_det((0, 0, 59, 59), (30.0, 30.0))
        assert not validate_detection(det, gate, 680, 480, task=1)


class TestRecoveryStitch:
    def plan(self):
        return lawnmower_plan(Arena(), 6.0, 2.4, 2.0)

    def test_climb_leg_height(self):
        plan = self.plan()
        current = Vec3(30.0, 3.0, 1.8)
        stitched, n_rec = recovery_stitch(current, Vec3(25.0, 3.0, 2.4), plan, 40, 2.0)
        climb = stitched.waypoints[1].position - stitched.waypoints[0].position
        assert abs(climb.z - 1.5) < 1e-12
        assert climb.x == 0.0 and climb.y == 0.0

    def test_degenerate_current_at_pause_point(self):
        plan = self.plan()
        p = Vec3(25.0, 3.0, 2.4)
        stitched, _ = recovery_stitch(p, p, plan, 40, 2.0)
        assert (stitched.waypoints[0].position - p).norm() < 1e-12
        assert abs(stitched.waypoints[1].position.z - (p.z + 1.5)) < 1e-12
        assert (stitched.waypoints[2].position - p).norm() < 1e-12

    def test_resumes_from_pause_index(self):
        plan = self.plan()
        idx = 37
        stitched, n_rec = recovery_stitch(Vec3(30, 3, 2.0), Vec3(25, 3, 2.4), plan, idx, 2.0)
        assert stitched.waypoints[n_rec].position == plan.waypoints[idx].position
        assert stitched.waypoints[-1].position == plan.waypoints[-1].position


class TestTask1StateMachine:
    def params(self):
        return MissionParams()

    def level_los(self, up_deg, horiz_deg):
        up = math.radians(up_deg)
        horiz = math.radians(horiz_deg)
        return Vec3(
            math.cos(up) * math.cos(horiz), math.cos(up) * math.sin(horiz), math.sin(up)
        )

    def test_converged_angles_trigger_attack(self):
        state = MissionState(mode=MissionMode.ADJUST)
        state.last_seen = 0.0
        los = self.level_los(13.0, 2.0)  # within 5 deg of the 10 deg target, horiz ok
        task1_step(state, los, UavState.at_rest(ZERO3), self.params(), 1.0)
        assert state.mode == MissionMode.ATTACK

    def test_large_horizontal_angle_keeps_adjusting(self):
        state = MissionState(mode=MissionMode.ADJUST)
        state.last_seen = 0.0
        cmd = task1_step(state, self.level_los(10.0, 20.0), UavState.at_rest(ZERO3), self.params(), 1.0)
        assert state.mode == MissionMode.ADJUST
        assert cmd.yaw_rate > 0.0  # target to the left -> yaw left

    def test_descends_when_target_appears_too_low(self):
        state = MissionState(mode=MissionMode.ADJUST)
        state.last_seen = 0.0
        cmd = task1_step(state, self.level_los(0.0, 0.0), UavState.at_rest(ZERO3), self.params(), 1.0)
        assert cmd.velocity_world.z < 0.0
        assert cmd.velocity_world.x == 0.0 and cmd.velocity_world.y == 0.0

    def test_lost_sight_beyond_timeout_recovers_without_attack(self):
        p = self.params()
        state = MissionState(mode=MissionMode.ADJUST)
        state.last_seen = 0.0
        task1_step(state, None, UavState.at_rest(ZERO3), p, p.adjust_timeout + 0.5)
        assert state.mode == MissionMode.RECOVER

    def test_attack_flies_the_los_then_times_out(self):
        p = self.params()
        state = MissionState(mode=MissionMode.ATTACK, mode_entered=0.0)
        state.last_seen = 0.0
        state.last_los_world = Vec3(1.0, 0.0, 0.2).unit()
        cmd = task1_step(state, None, UavState.at_rest(ZERO3), p, 0.5)
        assert abs(cmd.velocity_world.norm() - p.attack_speed) < 1e-9
        task1_step(state, None, UavState.at_rest(ZERO3), p, p.hold_after_loss + 0.6)
        assert state.mode == MissionMode.RECOVER


class TestTask2StateMachine:
    def test_forward_component_is_zero(self):
        state = MissionState(mode=MissionMode.ADJUST)
        state.last_seen = 0.0
        los = Vec3(1.0, 0.2, 0.1).unit()
        cmd = task2_step(state, los, UavState.at_rest(ZERO3), MissionParams(), 0.0)
        assert abs(cmd.velocity_world.x) < 1e-12
        assert cmd.velocity_world.y > 0.0 and cmd.velocity_world.z > 0.0

    def test_loss_enters_wait_then_resumes_on_redetect(self):
        p = MissionParams()
        state = MissionState(mode=MissionMode.ADJUST)
        state.last_seen = 0.0
        task2_step(state, None, UavState.at_rest(ZERO3), p, 1.0)
        assert state.mode == MissionMode.WAIT
        # re-detection at 30 s resumes alignment, resetting the wait clock
        task2_step(state, Vec3(1, 0, 0), UavState.at_rest(ZERO3), p, 30.0)
        assert state.mode == MissionMode.ADJUST

    def test_wait_timeout_returns_to_global_plan(self):
        p = MissionParams()
        state = MissionState(mode=MissionMode.WAIT, mode_entered=0.0)
        task2_step(state, None, UavState.at_rest(ZERO3), p, p.wait_timeout + 1.0)
        assert state.mode == MissionMode.GLOBAL_PLAN


class TestLosAngles:
    def test_level_forward(self):
        up, horiz = los_angles(Vec3(1.0, 0.0, 0.0))
        assert up == 0.0 and horiz == 0.0

    def test_up_and_left(self):
        up, horiz = los_angles(Vec3(1.0, 1.0, math.sqrt(2.0)))
        assert abs(up - math.pi / 4) < 1e-12
        assert abs(horiz - math.pi / 4) < 1e-12


class TestScenarioFile:
    def test_round_trip(self, tmp_path):
        data = {
            "task": 1,
            "arena": {"length": 60.0, "width": 30.0, "ceiling": 5.0},
            "balloons": [{"anchor": [20.0, 3.0, 2.2]}, {"anchor": [40.0, 9.0, 1.8], "radius": 0.25}],
            "faults": [{"kind": "gimbal_offset", "yaw_deg": 35.0}],
            "search": {"sweep_width": 6.0, "altitude": 2.4, "speed": 2.0},
            "gate": {"min_bbox_area_fraction": 0.004},
            "params": {"attack_speed": 2.5},
            "duration": 30.0,
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(data))
        sc = load_scenario(str(path))
        assert sc.task == 1
        assert sc.arena.length == 60.0
        assert len(sc.balloons) == 2
        assert sc.balloons[1].radius == 0.25
        assert sc.faults[0].yaw_deg == 35.0
        assert sc.params.attack_speed == 2.5
        assert sc.sweep_width == 6.0


class TestClosedLoopMission:
    def test_task1_identify_adjust_attack_pop(self):
        sc = Scenario(
            task=1, arena=Arena(),
            balloons=[BalloonSpec(anchor=Vec3(25.0, 3.0, 2.2))],
            duration=45.0,
        )
        res = run_mission(sc, SIM)
        assert res.pops == 1
        assert res.misses == 0
        kinds = [ev.event for ev in res.events]
        assert "registered" in kinds and "pop" in kinds
        modes = [(ev.data.get("from"), ev.data.get("to")) for ev in res.events if ev.event == "mode"]
        assert ("global_plan", "adjust") in modes
        assert ("adjust", "attack") in modes
        assert ("attack", "recover") in modes

    def test_event_log_jsonl(self):
        sc = Scenario(
            task=1, arena=Arena(),
            balloons=[BalloonSpec(anchor=Vec3(25.0, 3.0, 2.2))],
            duration=30.0,
        )
        res = run_mission(sc, SIM)
        buf = io.StringIO()
        res.write_events_jsonl(buf)
        lines = buf.getvalue().strip().splitlines()
        assert len(lines) == len(res.events)
        for line in lines:
            record = json.loads(line)
            assert "t" in record and "event" in record

    def test_camera_latency_delays_registration(self):
        def run(faults):
            sc = Scenario(
                task=1, arena=Arena(length=30.0),
                balloons=[BalloonSpec(anchor=Vec3(33.0, 6.0, 2.4))],
                faults=faults,
                params=MissionParams(adjust_timeout=2.0),
                duration=25.0,
            )
            return run_mission(sc, SIM)

        clean = run([])
        delayed = run([FaultSpec(kind="camera_latency", delay=0.1)])
        t_clean = next(ev.t for ev in clean.events if ev.event == "registered")
        t_delayed = next(ev.t for ev in delayed.events if ev.event == "registered")
        assert t_delayed >= t_clean + 0.08
        # registered mid-turn with a tight adjust budget: the first attempt
        # recovers without ever reaching Attack
        modes = [(ev.data.get("from"), ev.data.get("to")) for ev in delayed.events if ev.event == "mode"]
        first_adjust_exit = next(m for m in modes if m[0] == "adjust")
        assert first_adjust_exit == ("adjust", "recover")

    def test_downdraft_fault_displaces_balloon(self):
        sc = Scenario(
            task=1, arena=Arena(),
            balloons=[BalloonSpec(anchor=Vec3(25.0, 3.0, 2.2))],
            faults=[FaultSpec(kind="downdraft", impulse=2.0)],
            duration=60.0,
        )
        res = run_mission(sc, SIM)
        kinds = [ev.event for ev in res.events]
        # the balloon still gets popped eventually; the impulse event fires
        # only if the vehicle actually passed over it, so just require the
        # mission to have completed its pop
        assert res.pops == 1

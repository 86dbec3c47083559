"""Competition-style mission layer: arena, search planners, terminal guidance.

Task 1 sweeps the arena with a lawnmower pattern, registers balloon
detections through a validity gate, aligns with a two-angle Adjust state,
flies down the LOS to pop, and recovers to the registration point for a
second attempt after a miss. Task 2 searches from a square loop, aligns
laterally/vertically with the moving ball's path, and waits in place between
passes.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import IO, Optional

from .config import SimConfig
from .geometry import (
    Pose,
    Vec3,
    ZERO3,
    body_heading,
    camera_to_world,
    wrap_angle,
)
from .perception import Detection
from .engagement import PerceptionFrame, PerceptionPipeline
from .targets import PeriodicCurvePath, TargetState, fig8_curve
from .trajectory import Trajectory, Waypoint, cursor_step
from .vehicle import (
    PoseController,
    UavState,
    VelocityController,
    dynamics_step,
    mount_pitch_for_speed,
)


@dataclass
class Arena:
    length: float = 100.0  # x extent, m
    width: float = 40.0    # y extent, m
    ceiling: float = 5.0   # Task 1 altitude cap, m
    dropoff: Optional[Vec3] = None  # unused: ball return is out of scope

    def validate(self) -> None:
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError("arena extents must be positive")

    @property
    def center(self) -> Vec3:
        return Vec3(self.length / 2.0, self.width / 2.0, 0.0)


class MissionMode(str, enum.Enum):
    GLOBAL_PLAN = "global_plan"
    ADJUST = "adjust"
    ATTACK = "attack"
    WAIT = "wait"
    RECOVER = "recover"


@dataclass
class ValidityGate:
    min_bbox_area_fraction: float = 0.004
    bottom_exclusion_fraction: float = 0.30  # Task 2 only

    def validate(self) -> None:
        for f in (self.min_bbox_area_fraction, self.bottom_exclusion_fraction):
            if not (0.0 <= f < 1.0):
                raise ValueError("gate fractions must be in [0, 1)")


def validate_detection(
    det: Detection, gate: ValidityGate, width: int, height: int, task: int
) -> bool:
    """Area gate (strict >) plus, for Task 2, the bottom-of-image exclusion."""
    min_u, min_v, max_u, max_v = det.bbox
    area = (max_u - min_u + 1) * (max_v - min_v + 1)
    if area / float(width * height) <= gate.min_bbox_area_fraction:
        return False
    if task == 2 and det.centroid[1] >= (1.0 - gate.bottom_exclusion_fraction) * height:
        return False
    return True


# ---------------------------------------------------------------------------
# global search planners
# ---------------------------------------------------------------------------


def _timed_waypoints(points: list[tuple[Vec3, float]], speed: float) -> Trajectory:
    """Chain positions into a trajectory at constant ground speed."""
    times = [0.0]
    waypoints = [Waypoint(points[0][0], points[0][1], speed)]
    for (pos, yaw) in points[1:]:
        dist = (pos - waypoints[-1].position).norm()
        dt = max(dist / speed, 1e-3)
        times.append(times[-1] + dt)
        waypoints.append(Waypoint(pos, yaw, speed))
    return Trajectory(times, waypoints)


def _leg_points(a: Vec3, b: Vec3, spacing: float) -> list[Vec3]:
    dist = (b - a).norm()
    n = max(1, int(math.ceil(dist / spacing)))
    return [a + (b - a).scale(i / n) for i in range(1, n + 1)]


def lawnmower_legs(arena: Arena, sweep_width: float) -> list[float]:
    """Forward-pass leg offsets across the arena width."""
    if sweep_width <= 0.0 or sweep_width > arena.width:
        raise ValueError("sweep width must be in (0, arena width]")
    n = int(math.ceil(arena.width / sweep_width))
    return [min(sweep_width / 2.0 + i * sweep_width, arena.width) for i in range(n)]


def lawnmower_plan(
    arena: Arena,
    sweep_width: float,
    altitude: float,
    speed: float,
    start: Vec3 = ZERO3,
    waypoint_spacing: float = 2.0,
) -> Trajectory:
    """Boustrophedon sweep of the arena at fixed altitude.

    Forward legs run the arena length at the computed offsets; the reverse
    pass is shifted laterally by half the sweep width to halve the effective
    spacing. Takeoff and landing segments complete the plan.
    """
    arena.validate()
    legs_fwd = lawnmower_legs(arena, sweep_width)
    legs_rev = [y + sweep_width / 2.0 for y in legs_fwd if y + sweep_width / 2.0 <= arena.width]

    points: list[tuple[Vec3, float]] = [(start, 0.0)]
    points.append((Vec3(start.x, start.y, altitude), 0.0))  # takeoff

    x_near, x_far = 0.0, arena.length
    x = x_near
    for y in legs_fwd:
        yaw = 0.0 if x == x_near else math.pi
        entry = Vec3(x, y, altitude)
        points.append((entry, yaw))
        x_end = x_far if x == x_near else x_near
        for p in _leg_points(entry, Vec3(x_end, y, altitude), waypoint_spacing):
            points.append((p, yaw))
        x = x_end
    for y in reversed(legs_rev):
        yaw = 0.0 if x == x_near else math.pi
        entry = Vec3(x, y, altitude)
        points.append((entry, yaw))
        x_end = x_far if x == x_near else x_near
        for p in _leg_points(entry, Vec3(x_end, y, altitude), waypoint_spacing):
            points.append((p, yaw))
        x = x_end
    end = points[-1][0]
    points.append((Vec3(end.x, end.y, 0.0), points[-1][1]))  # landing
    return _timed_waypoints(points, speed)


def square_search_plan(
    arena: Arena,
    altitude: float,
    speed: float,
    side: float = 12.0,
    waypoint_spacing: float = 2.0,
) -> Trajectory:
    """Closed square loop at the arena center, yaw fixed along the long side
    so the camera keeps facing the crossing of the target's figure-8."""
    arena.validate()
    if altitude <= arena.ceiling:
        raise ValueError("Task 2 search altitude must clear the Task 1 ceiling")
    c = arena.center
    h = side / 2.0
    corners = [
        Vec3(c.x - h, c.y - h, altitude),
        Vec3(c.x + h, c.y - h, altitude),
        Vec3(c.x + h, c.y + h, altitude),
        Vec3(c.x - h, c.y + h, altitude),
    ]
    points: list[tuple[Vec3, float]] = [(corners[0], 0.0)]
    for a, b in zip(corners, corners[1:] + corners[:1]):
        for p in _leg_points(a, b, waypoint_spacing):
            points.append((p, 0.0))
    return _timed_waypoints(points, speed)


def recovery_stitch(
    current: Vec3,
    pause_point: Vec3,
    plan: Trajectory,
    resume_index: int,
    speed: float,
    climb: float = 1.5,
) -> tuple[Trajectory, int]:
    """Recovery segment: climb, return to the registration point, resume the
    paused plan. Returns the stitched trajectory and the index of its first
    resumed-plan waypoint."""
    points: list[tuple[Vec3, float]] = [(current, 0.0)]
    points.append((Vec3(current.x, current.y, current.z + climb), 0.0))
    points.append((pause_point, 0.0))
    recovery = _timed_waypoints(points, speed)
    n_recovery = len(recovery.waypoints)

    resume_times = plan.times[resume_index:]
    resume_wps = plan.waypoints[resume_index:]
    t0 = recovery.times[-1]
    gap = (resume_wps[0].position - pause_point).norm()
    times = recovery.times + [t0 + max(gap / speed, 1e-3) + (t - resume_times[0]) for t in resume_times]
    waypoints = recovery.waypoints + list(resume_wps)
    return Trajectory(times, waypoints), n_recovery


# ---------------------------------------------------------------------------
# terminal guidance state machines
# ---------------------------------------------------------------------------


@dataclass
class MissionParams:
    adjust_up_angle: float = math.radians(10.0)  # desired LOS elevation in Adjust
    angle_tolerance: float = math.radians(5.0)
    adjust_kp_z: float = 1.2       # m/s per rad of elevation error
    adjust_kp_yaw: float = 1.2     # rad/s per rad of horizontal angle
    adjust_timeout: float = 6.0    # s without convergence or sight
    attack_speed: float = 2.0      # m/s along the LOS
    hold_after_loss: float = 1.0   # s the Attack keeps flying blind
    task2_gain: float = 1.2        # m/s per unit lateral/vertical LOS component
    wait_timeout: float = 60.0     # s in Wait before resuming the search
    pop_contact: float = 0.65      # m center distance counting as a pop


@dataclass
class MissionState:
    mode: MissionMode = MissionMode.GLOBAL_PLAN
    mode_entered: float = 0.0
    pause_point: Optional[Vec3] = None
    pause_index: int = 0
    last_seen: float = -math.inf
    last_los_world: Optional[Vec3] = None

    def transition(self, mode: MissionMode, t: float) -> None:
        self.mode = mode
        self.mode_entered = t


@dataclass(frozen=True)
class VelocityCommand:
    velocity_world: Vec3
    yaw_rate: float


def los_angles(r_level: Vec3) -> tuple[float, float]:
    """(upward angle, horizontal angle) of a level-frame LOS direction.

    The level frame is the yaw-aligned horizontal frame: the gimbal holds the
    camera at a preset angle, so the guidance angles are attitude-stabilized
    rather than swinging with braking/accelerating tilt transients."""
    horizontal = math.hypot(r_level.x, r_level.y)
    up = math.atan2(r_level.z, horizontal)
    return up, body_heading(r_level)


def task1_step(
    state: MissionState,
    los_level: Optional[Vec3],
    uav: UavState,
    params: MissionParams,
    t: float,
) -> VelocityCommand:
    """Adjust/Attack velocity command; transitions mutate `state`."""
    if state.mode == MissionMode.ADJUST:
        if los_level is None:
            if t - state.last_seen > params.adjust_timeout:
                state.transition(MissionMode.RECOVER, t)
            return VelocityCommand(ZERO3, 0.0)
        up, horiz = los_angles(los_level)
        up_err = params.adjust_up_angle - up
        if abs(up_err) <= params.angle_tolerance and abs(horiz) <= params.angle_tolerance:
            state.transition(MissionMode.ATTACK, t)
            return VelocityCommand(ZERO3, 0.0)
        if t - state.mode_entered > params.adjust_timeout:
            state.transition(MissionMode.RECOVER, t)
            return VelocityCommand(ZERO3, 0.0)
        # descend to raise the apparent elevation, yaw toward centering
        v_world = Vec3(0.0, 0.0, -params.adjust_kp_z * up_err)
        return VelocityCommand(v_world, params.adjust_kp_yaw * horiz)

    if state.mode == MissionMode.ATTACK:
        if t - state.last_seen > params.hold_after_loss:
            state.transition(MissionMode.RECOVER, t)
            return VelocityCommand(ZERO3, 0.0)
        los = state.last_los_world
        if los is None:
            return VelocityCommand(ZERO3, 0.0)
        return VelocityCommand(los.scale(params.attack_speed), 0.0)

    return VelocityCommand(ZERO3, 0.0)


def task2_step(
    state: MissionState,
    los_level: Optional[Vec3],
    uav: UavState,
    params: MissionParams,
    t: float,
) -> VelocityCommand:
    """Lateral/vertical alignment with the ball's path; forward velocity 0."""
    if state.mode == MissionMode.ADJUST:
        if los_level is None:
            state.transition(MissionMode.WAIT, t)
            return VelocityCommand(ZERO3, 0.0)
        u = los_level.unit()
        v_level = Vec3(0.0, params.task2_gain * u.y, params.task2_gain * u.z)
        cy, sy = math.cos(uav.pose.yaw), math.sin(uav.pose.yaw)
        v_world = Vec3(cy * v_level.x - sy * v_level.y, sy * v_level.x + cy * v_level.y, v_level.z)
        return VelocityCommand(v_world, 0.0)

    if state.mode == MissionMode.WAIT:
        if los_level is not None:
            state.transition(MissionMode.ADJUST, t)
            return task2_step(state, los_level, uav, params, t)
        if t - state.mode_entered > params.wait_timeout:
            state.transition(MissionMode.GLOBAL_PLAN, t)
        return VelocityCommand(ZERO3, 0.0)

    return VelocityCommand(ZERO3, 0.0)


# ---------------------------------------------------------------------------
# scenario model and closed-loop mission simulation
# ---------------------------------------------------------------------------


@dataclass
class BalloonSpec:
    anchor: Vec3
    radius: float = 0.3  # 60 cm diameter


@dataclass
class BallSpec:
    center: Vec3
    speed: float = 8.0
    slow_speed: float = 3.0
    slow_after: float = 480.0  # s into the mission
    radius: float = 0.075      # 15 cm ball
    plane_yaw: float = 0.0     # orientation of the figure-8 plane
    width: float = 10.0
    height: float = 6.0
    phase: float = 0.0


@dataclass
class FaultSpec:
    kind: str                      # gimbal_offset | camera_latency | downdraft
    pitch_deg: float = 0.0
    yaw_deg: float = 0.0
    delay: float = 0.1
    impulse: float = 1.5           # m/s lateral kick for downdraft
    clear_on_recover: bool = True  # gimbal fault: cleared by the recovery reset


@dataclass
class Scenario:
    task: int
    arena: Arena = field(default_factory=Arena)
    balloons: list[BalloonSpec] = field(default_factory=list)
    ball: Optional[BallSpec] = None
    faults: list[FaultSpec] = field(default_factory=list)
    gate: ValidityGate = field(default_factory=ValidityGate)
    params: MissionParams = field(default_factory=MissionParams)
    duration: float = 120.0
    # search parameters (tuned values from the mission design)
    sweep_width: float = 6.0
    search_altitude: float = 2.4
    search_speed: float = 2.0
    square_altitude: float = 11.0
    square_speed: float = 1.0
    square_side: float = 12.0
    start: Vec3 = Vec3(2.0, 2.0, 0.0)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return scenario_from_dict(data)


def _vec(v) -> Vec3:
    return Vec3(float(v[0]), float(v[1]), float(v[2]))


def scenario_from_dict(data: dict) -> Scenario:
    arena_d = data.get("arena", {})
    arena = Arena(
        length=arena_d.get("length", 100.0),
        width=arena_d.get("width", 40.0),
        ceiling=arena_d.get("ceiling", 5.0),
        dropoff=_vec(arena_d["dropoff"]) if "dropoff" in arena_d else None,
    )
    balloons = [
        BalloonSpec(anchor=_vec(b["anchor"]), radius=b.get("radius", 0.3))
        for b in data.get("balloons", [])
    ]
    ball = None
    if "ball" in data:
        b = data["ball"]
        ball = BallSpec(
            center=_vec(b["center"]),
            speed=b.get("speed", 8.0),
            slow_speed=b.get("slow_speed", 3.0),
            slow_after=b.get("slow_after", 480.0),
            radius=b.get("radius", 0.075),
            plane_yaw=math.radians(b.get("plane_yaw_deg", 0.0)),
            width=b.get("width", 10.0),
            height=b.get("height", 6.0),
            phase=b.get("phase", 0.0),
        )
    faults = [
        FaultSpec(
            kind=f["kind"],
            pitch_deg=f.get("pitch_deg", 0.0),
            yaw_deg=f.get("yaw_deg", 0.0),
            delay=f.get("delay", 0.1),
            impulse=f.get("impulse", 1.5),
            clear_on_recover=f.get("clear_on_recover", True),
        )
        for f in data.get("faults", [])
    ]
    gate_d = data.get("gate", {})
    gate = ValidityGate(
        min_bbox_area_fraction=gate_d.get("min_bbox_area_fraction", 0.004),
        bottom_exclusion_fraction=gate_d.get("bottom_exclusion_fraction", 0.30),
    )
    params = MissionParams(**{k: v for k, v in data.get("params", {}).items()})
    search = data.get("search", {})
    return Scenario(
        task=int(data["task"]),
        arena=arena,
        balloons=balloons,
        ball=ball,
        faults=faults,
        gate=gate,
        params=params,
        duration=data.get("duration", 120.0),
        sweep_width=search.get("sweep_width", 6.0),
        search_altitude=search.get("altitude", 2.4),
        search_speed=search.get("speed", 2.0),
        square_altitude=search.get("square_altitude", 11.0),
        square_speed=search.get("square_speed", 1.0),
        square_side=search.get("square_side", 12.0),
        start=_vec(data["start"]) if "start" in data else Vec3(2.0, 2.0, 0.0),
    )


class BallPath:
    """Figure-8 flown by the target carrier; speed drops partway through."""

    def __init__(self, spec: BallSpec):
        curve, point, tangent = fig8_curve(spec.width / 2.0, spec.height)
        from .geometry import rot_z

        self._path = PeriodicCurvePath(
            curve, point, tangent, rot_z(spec.plane_yaw), spec.center,
            spec.speed, spec.radius, spec.phase, 1.0,
        )
        self.spec = spec

    def sample(self, t: float) -> TargetState:
        sp = self.spec
        if t <= sp.slow_after:
            s = sp.speed * t
            speed = sp.speed
        else:
            s = sp.speed * sp.slow_after + sp.slow_speed * (t - sp.slow_after)
            speed = sp.slow_speed
        return self._path.sample_arc(s, speed)


@dataclass
class MissionEvent:
    t: float
    event: str
    data: dict


@dataclass
class MissionResult:
    events: list[MissionEvent]
    pops: int
    misses: int
    command_log: list[tuple[float, str, Vec3, float]]  # t, mode, world velocity cmd, uav z
    min_ball_distance: float
    final_mode: str

    def write_events_jsonl(self, fh: IO[str]) -> None:
        for ev in self.events:
            record = {"t": round(ev.t, 4), "event": ev.event}
            record.update(ev.data)
            fh.write(json.dumps(record, sort_keys=True) + "\n")


@dataclass
class _Balloon:
    spec: BalloonSpec
    offset: Vec3 = ZERO3
    offset_vel: Vec3 = ZERO3
    alive: bool = True

    @property
    def position(self) -> Vec3:
        return self.spec.anchor + self.offset


class MissionSimulator:
    """Closed-loop Challenge-1 mission run."""

    def __init__(self, scenario: Scenario, sim: SimConfig):
        scenario.arena.validate()
        scenario.gate.validate()
        self.sc = scenario
        self.sim = sim
        self.events: list[MissionEvent] = []
        self.command_log: list[tuple[float, str, Vec3, float]] = []
        self.pops = 0
        self.misses = 0

    def _emit(self, t: float, event: str, **data) -> None:
        self.events.append(MissionEvent(t, event, data))

    def run(self) -> MissionResult:
        sc = self.sc
        sim = self.sim
        params = sc.params
        vparams = sim.vehicle.params()
        gains = sim.vehicle.gains.controller_gains()
        task = sc.task

        if task == 1:
            plan = lawnmower_plan(sc.arena, sc.sweep_width, sc.search_altitude, sc.search_speed, sc.start)
            cruise = sc.search_speed
        else:
            plan = square_search_plan(sc.arena, sc.square_altitude, sc.square_speed, sc.square_side)
            cruise = sc.square_speed
        mount_pitch = (
            math.radians(sim.camera.mount_pitch_deg)
            if sim.camera.mount_pitch_deg is not None
            else mount_pitch_for_speed(cruise, vparams)
        )

        gimbal = next((f for f in sc.faults if f.kind == "gimbal_offset"), None)
        latency = next((f for f in sc.faults if f.kind == "camera_latency"), None)
        downdraft = next((f for f in sc.faults if f.kind == "downdraft"), None)
        gimbal_active = gimbal is not None

        balloons = [_Balloon(spec=b) for b in sc.balloons]
        ball = BallPath(sc.ball) if sc.ball is not None else None

        diameter = 2.0 * (sc.balloons[0].radius if task == 1 and sc.balloons else (sc.ball.radius if sc.ball else 0.3))
        pipeline = PerceptionPipeline(sim, mount_pitch, diameter)
        pose_ctl = PoseController(gains)
        vel_ctl = VelocityController(gains, vparams)

        k_cam = pipeline.k
        state = MissionState()
        uav = UavState(
            Pose(sc.start if task == 1 else plan.waypoints[0].position, ZERO3, 0.0, 0.0, 0.0),
            ZERO3,
            0.0,
        )

        dyn_hz = sim.rates.dynamics_hz
        dt = 1.0 / dyn_hz
        ctrl_every = max(1, round(dyn_hz / sim.rates.control_hz))
        dt_ctrl = ctrl_every * dt
        percep_hz = sim.rates.perception_hz

        active_traj = plan
        traj_start = 0.0
        cursor_min = 0
        recover_until_index: Optional[int] = None
        plan_pause_time = 0.0

        los_level: Optional[Vec3] = None
        los_world: Optional[Vec3] = None
        los_valid = False
        frame_queue: list[tuple[float, Optional[Vec3], Optional[Vec3], bool]] = []
        min_ball_dist = math.inf
        attack_saw_pop = False
        n_steps = int(round(sc.duration / dt))
        percep_mark = -1
        att_cmd = None
        v_cmd = VelocityCommand(ZERO3, 0.0)
        logged_mode = state.mode

        for k in range(n_steps):
            t = k * dt

            pm = (k * percep_hz) // dyn_hz
            if pm != percep_mark:
                percep_mark = pm
                bias_p = math.radians(gimbal.pitch_deg) if (gimbal and gimbal_active) else 0.0
                bias_y = math.radians(gimbal.yaw_deg) if (gimbal and gimbal_active) else 0.0
                obs = self._observe(t, uav, balloons, ball, pipeline, k_cam, bias_p, bias_y, task)
                if latency is not None:
                    frame_queue.append((t, obs[0], obs[1], obs[2]))
                    los_level, los_world, los_valid = None, None, False
                    while frame_queue and frame_queue[0][0] <= t - latency.delay:
                        _, los_level, los_world, los_valid = frame_queue.pop(0)
                else:
                    los_level, los_world, los_valid = obs
                if los_level is not None:
                    state.last_seen = t
                    state.last_los_world = los_world
                    if state.mode == MissionMode.GLOBAL_PLAN and los_valid:
                        state.pause_point = uav.pose.position
                        state.pause_index = cursor_min
                        plan_pause_time = t - traj_start
                        state.transition(MissionMode.ADJUST, t)
                        self._emit(t, "registered", task=task, position=_vec_list(uav.pose.position))

            if k % ctrl_every == 0:
                if state.mode in (MissionMode.GLOBAL_PLAN, MissionMode.RECOVER):
                    cur = cursor_step(
                        active_traj, t - traj_start,
                        sim.trajectory.replan_hz, sim.trajectory.lookahead_buffer, cursor_min,
                    )
                    cursor_min = cur.tracking_index
                    wp = cur.tracking_point
                    yaw_rate = gains.yaw_kp * wrap_angle(wp.yaw - uav.pose.yaw)
                    v_ref = pose_ctl.step(wp, cur.tracking_velocity, uav, dt_ctrl)
                    att_cmd = vel_ctl.step(v_ref, ZERO3, yaw_rate, uav, dt_ctrl)
                    if (
                        state.mode == MissionMode.RECOVER
                        and recover_until_index is not None
                        and cursor_min >= recover_until_index
                    ):
                        state.transition(MissionMode.GLOBAL_PLAN, t)
                        recover_until_index = None
                else:
                    stale = (t - state.last_seen) > (2.5 / percep_hz)
                    seen = None if stale else los_level
                    if task == 1:
                        v_cmd = task1_step(state, seen, uav, params, t)
                    else:
                        v_cmd = task2_step(state, seen, uav, params, t)
                    self.command_log.append((t, state.mode.value, v_cmd.velocity_world, uav.pose.position.z))
                    v_ref = v_cmd.velocity_world
                    att_cmd = vel_ctl.step(v_ref, ZERO3, v_cmd.yaw_rate, uav, dt_ctrl)

            uav = dynamics_step(uav, att_cmd, dt, vparams)
            t_next = (k + 1) * dt

            # balloon tether dynamics and pop/downdraft checks
            if task == 1:
                for b in balloons:
                    if not b.alive:
                        continue
                    if downdraft is not None:
                        d = uav.pose.position - b.position
                        horiz = math.hypot(d.x, d.y)
                        if horiz < 1.0 and 0.0 < d.z < 2.0 and b.offset_vel.norm() < 0.1:
                            away = Vec3(-d.x, -d.y, 0.0)
                            away = away.unit() if away.norm() > 1e-6 else Vec3(1.0, 0.0, 0.0)
                            b.offset_vel = b.offset_vel + away.scale(downdraft.impulse)
                            self._emit(t_next, "downdraft", balloon=balloons.index(b))
                    # spring-damper back toward the anchor, displacement bounded
                    acc = b.offset.scale(-4.0) + b.offset_vel.scale(-1.5)
                    b.offset_vel = b.offset_vel + acc.scale(dt)
                    b.offset = b.offset + b.offset_vel.scale(dt)
                    if b.offset.norm() > 0.5:
                        b.offset = b.offset.scale(0.5 / b.offset.norm())
                    if (uav.pose.position - b.position).norm() <= params.pop_contact:
                        b.alive = False
                        self.pops += 1
                        attack_saw_pop = True
                        self._emit(t_next, "pop", balloon=balloons.index(b))
                        if state.mode in (MissionMode.ADJUST, MissionMode.ATTACK):
                            state.transition(MissionMode.RECOVER, t_next)
            else:
                if ball is not None:
                    bp = ball.sample(t_next).position
                    min_ball_dist = min(min_ball_dist, (uav.pose.position - bp).norm())

            # centralized transition bookkeeping: transitions may originate in
            # the perception tick, the state machines, or a pop event
            if state.mode != logged_mode:
                self._emit(t_next, "mode", **{"from": logged_mode.value, "to": state.mode.value})
                if logged_mode == MissionMode.ATTACK and state.mode != MissionMode.ATTACK:
                    if not attack_saw_pop:
                        self.misses += 1
                        self._emit(t_next, "miss", task=task)
                    attack_saw_pop = False
                if state.mode == MissionMode.RECOVER:
                    if task == 1:
                        active_traj, recover_until_index = recovery_stitch(
                            uav.pose.position, state.pause_point or uav.pose.position,
                            plan, state.pause_index, sc.search_speed,
                        )
                        # later pauses index into the stitched plan
                        plan = active_traj
                        traj_start = t_next
                        cursor_min = 0
                        if gimbal is not None and gimbal.clear_on_recover:
                            gimbal_active = False
                    else:
                        state.transition(MissionMode.GLOBAL_PLAN, t_next)
                if state.mode == MissionMode.GLOBAL_PLAN and logged_mode == MissionMode.WAIT:
                    # resume the paused search plan where it was left
                    traj_start = t_next - plan_pause_time
                    cursor_min = state.pause_index
                    active_traj = plan
                logged_mode = state.mode

        return MissionResult(
            events=self.events,
            pops=self.pops,
            misses=self.misses,
            command_log=self.command_log,
            min_ball_distance=min_ball_dist,
            final_mode=state.mode.value,
        )

    def _observe(
        self,
        t: float,
        uav: UavState,
        balloons: list[_Balloon],
        ball: Optional[BallPath],
        pipeline: PerceptionPipeline,
        k_cam,
        bias_pitch: float,
        bias_yaw: float,
        task: int,
    ) -> tuple[Optional[Vec3], Optional[Vec3], bool]:
        """Best detection this frame -> (LOS level dir, LOS world unit, gate-valid).

        The validity gate qualifies a detection for *registration*; once the
        terminal guidance owns the vehicle, raw detections keep feeding it."""
        best: Optional[PerceptionFrame] = None
        best_det = None
        if task == 1:
            for b in balloons:
                if not b.alive:
                    continue
                frame = pipeline.observe(
                    t, TargetState(b.position, ZERO3, b.spec.radius), uav.pose,
                    mount_bias_pitch=bias_pitch, mount_bias_yaw=bias_yaw,
                )
                if not frame.detected:
                    continue
                det = frame.detection
                if best_det is None or det.pixel_count > best_det.pixel_count:
                    best, best_det = frame, det
        elif ball is not None:
            st = ball.sample(t)
            frame = pipeline.observe(
                t, st, uav.pose, mount_bias_pitch=bias_pitch, mount_bias_yaw=bias_yaw
            )
            if frame.detected:
                best = frame
        if best is None:
            return None, None, False
        valid = validate_detection(
            best.detection, self.sc.gate, k_cam.width, k_cam.height, task
        )
        ray = best.sample.r
        los_world = camera_to_world(ray, uav.pose, pipeline.mount_pitch).unit()
        cy, sy = math.cos(uav.pose.yaw), math.sin(uav.pose.yaw)
        los_level = Vec3(cy * los_world.x + sy * los_world.y,
                         -sy * los_world.x + cy * los_world.y, los_world.z)
        return los_level, los_world, valid


def _vec_list(v: Vec3) -> list[float]:
    return [round(v.x, 3), round(v.y, 3), round(v.z, 3)]


def run_mission(scenario: Scenario, sim: SimConfig) -> MissionResult:
    return MissionSimulator(scenario, sim).run()

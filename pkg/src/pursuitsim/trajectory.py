"""Timed waypoint trajectories, their generation, and tracking cursors.

Trajectories are immutable once built. Replanning happens from the cursor's
lookahead point: a fresh segment is generated starting there and stitched
onto the flown prefix, keeping the commanded path position-continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Sequence

from .geometry import Vec3, ZERO3


@dataclass(frozen=True)
class Waypoint:
    position: Vec3
    yaw: float
    speed: float  # m/s, scalar


class Trajectory:
    """Waypoints with strictly increasing timestamps starting at 0."""

    def __init__(self, times: Sequence[float], waypoints: Sequence[Waypoint]):
        if len(times) != len(waypoints):
            raise ValueError("times and waypoints must pair up")
        if len(waypoints) < 2:
            raise ValueError("a trajectory needs at least 2 waypoints")
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise ValueError("timestamps must be strictly increasing")
        self.times = list(times)
        self.waypoints = list(waypoints)

    @property
    def duration(self) -> float:
        return self.times[-1] - self.times[0]

    def __len__(self) -> int:
        return len(self.waypoints)

    def velocity_at(self, index: int) -> Vec3:
        """Feedforward velocity: finite difference toward the next waypoint."""
        if index >= len(self.waypoints) - 1:
            return ZERO3
        dt = self.times[index + 1] - self.times[index]
        dp = self.waypoints[index + 1].position - self.waypoints[index].position
        return dp.scale(1.0 / dt)

    def dump_csv(self, fh: IO[str]) -> None:
        fh.write("t,x,y,z,yaw,speed\n")
        for t, wp in zip(self.times, self.waypoints):
            fh.write(
                f"{t:.6f},{wp.position.x:.6f},{wp.position.y:.6f},"
                f"{wp.position.z:.6f},{wp.yaw:.6f},{wp.speed:.6f}\n"
            )


@dataclass(frozen=True)
class TrajectoryCursor:
    tracking_point: Waypoint
    lookahead_point: Waypoint
    lookahead_time: float
    tracking_index: int
    lookahead_index: int
    tracking_velocity: Vec3  # feedforward for the pose controller


def _timeline(horizon: float, dt: float) -> list[float]:
    n = int(math.floor(horizon / dt + 1e-9))
    times = [i * dt for i in range(n + 1)]
    if times[-1] < horizon - 1e-9:
        times.append(horizon)
    if len(times) < 2:
        times = [0.0, horizon]
    return times


def gen_los_accel_trajectory(
    start: Waypoint, v0: Vec3, accel: Vec3, horizon: float, dt: float
) -> Trajectory:
    """Constant-acceleration kinematic rollout from the replanning point.

    p(t) = p0 + v0 t + 1/2 a t^2, v(t) = v0 + a t, sampled at the trajectory
    discretization; yaw faces the velocity direction.
    """
    if horizon <= 0.0 or dt <= 0.0:
        raise ValueError("horizon and dt must be positive")
    times = _timeline(horizon, dt)
    waypoints = []
    for t in times:
        pos = start.position + v0.scale(t) + accel.scale(0.5 * t * t)
        vel = v0 + accel.scale(t)
        speed = vel.norm()
        yaw = math.atan2(vel.y, vel.x) if speed > 1e-9 else start.yaw
        waypoints.append(Waypoint(pos, yaw, speed))
    return Trajectory(times, waypoints)


class NoClosingVelocityError(ValueError):
    """Forecasting is undefined without a positive closing component."""


@dataclass(frozen=True)
class ForecastInputs:
    d0: float
    d1: float
    los0: Vec3  # unit, world axes, measured from the vehicle
    los1: Vec3
    t0: float
    t1: float
    uav_vel: Vec3


MIN_CLOSING_SPEED = 0.1  # m/s


def forecast_target(inputs: ForecastInputs) -> tuple[Vec3, float, Vec3]:
    """Straight-line target forecast from two range+bearing fixes.

    Returns (target velocity, time to collision along the current LOS,
    collision point in vehicle-relative coordinates):

        v_target    = (d1*los1 - d0*los0) / (t1 - t0)
        t_collision = d1 / <v_uav, los1>
        p_collision = v_target * t_collision + d1*los1
    """
    if inputs.t1 <= inputs.t0:
        raise ValueError("t1 must exceed t0")
    if inputs.d0 <= 0.0 or inputs.d1 <= 0.0:
        raise ValueError("ranges must be positive")
    closing = inputs.uav_vel.dot(inputs.los1)
    if closing <= MIN_CLOSING_SPEED:
        raise NoClosingVelocityError(f"closing speed {closing:.3f} m/s along the LOS")
    dt = inputs.t1 - inputs.t0
    p1 = inputs.los1.scale(inputs.d1)
    p0 = inputs.los0.scale(inputs.d0)
    v_target = (p1 - p0).scale(1.0 / dt)
    t_collision = inputs.d1 / closing
    p_collision = v_target.scale(t_collision) + p1
    return v_target, t_collision, p_collision


def gen_forecast_trajectory(
    start: Waypoint, p_collision: Vec3, t_collision: float, dt: float
) -> Trajectory:
    """Straight constant-speed line reaching p_collision at t_collision."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    delta = p_collision - start.position
    dist = delta.norm()
    if dist < 1e-12:
        # degenerate replan onto the current position: hold in place
        hold = Waypoint(start.position, start.yaw, 0.0)
        return Trajectory([0.0, dt], [hold, hold])
    if t_collision <= dt:
        raise ValueError("t_collision must exceed one discretization step")
    direction = delta.scale(1.0 / dist)
    speed = dist / t_collision
    yaw = math.atan2(direction.y, direction.x)
    times = _timeline(t_collision, dt)
    waypoints = [
        Waypoint(start.position + direction.scale(speed * t), yaw, speed) for t in times
    ]
    return Trajectory(times, waypoints)


def cursor_step(
    traj: Trajectory,
    now: float,
    f_replan: float,
    buffer: float,
    min_index: int = 0,
) -> TrajectoryCursor:
    """Tracking and lookahead points at trajectory time `now`.

    The tracking point is the earliest waypoint not yet passed, selected by
    time progression (never by Euclidean proximity, which self-intersecting
    paths would capture); min_index keeps the cursor monotone across calls.
    The lookahead point sits 1/f_replan + buffer later and is the point new
    segments are stitched from, clamped to the trajectory end.
    """
    if f_replan <= 0.0:
        raise ValueError("replan frequency must be positive")
    lookahead_time = 1.0 / f_replan + buffer
    n = len(traj.waypoints)
    idx = min_index
    while idx < n - 1 and traj.times[idx] < now:
        idx += 1
    target_time = traj.times[idx] + lookahead_time
    look = idx
    while look < n - 1 and traj.times[look] < target_time:
        look += 1
    return TrajectoryCursor(
        tracking_point=traj.waypoints[idx],
        lookahead_point=traj.waypoints[look],
        lookahead_time=lookahead_time,
        tracking_index=idx,
        lookahead_index=look,
        tracking_velocity=traj.velocity_at(idx),
    )


STITCH_TOL = 1e-6  # m


def stitch(old: Trajectory, new: Trajectory, at_index: int) -> Trajectory:
    """Truncate `old` at the lookahead waypoint and append `new` there.

    `new` must start where old.waypoints[at_index] sits (within tolerance);
    the result keeps old's timeline up to the stitch and re-bases new's
    timestamps to continue it.
    """
    if not (0 <= at_index < len(old.waypoints)):
        raise ValueError("stitch index out of range")
    gap = (new.waypoints[0].position - old.waypoints[at_index].position).norm()
    if gap > STITCH_TOL:
        raise ValueError(f"new trajectory starts {gap:.2e} m away from the stitch point")
    stitch_time = old.times[at_index]
    times = old.times[: at_index + 1]
    waypoints = old.waypoints[: at_index + 1]
    offset = stitch_time - new.times[0]
    times = times + [t + offset for t in new.times[1:]]
    waypoints = waypoints + new.waypoints[1:]
    return Trajectory(times, waypoints)

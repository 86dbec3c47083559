"""Configuration tree for the simulator.

Every tunable named across the modules lives here with its default, and the
whole tree round-trips through JSON so experiment configs are a single file.
Unknown keys are rejected rather than silently ignored.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .geometry import CameraIntrinsics
from .guidance import GuidanceParams
from .vehicle import ControllerGains, PidGains, VehicleParams


@dataclass
class CameraConfig:
    width: int = 680
    height: int = 480
    hfov_deg: float = 105.0
    # None -> tilt up by the steady-state pitch-down at the trial's UAV speed
    mount_pitch_deg: Optional[float] = None

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_hfov(math.radians(self.hfov_deg), self.width, self.height)


@dataclass
class PerceptionConfig:
    filter_window: int = 5       # flat moving-average length, frames
    min_blob_pixels: int = 3


@dataclass
class GuidanceConfig:
    pn_gain: float = 3.0
    kp_yaw: float = 1.2
    k_heading: float = 0.35      # rad
    suppression: float = 0.2
    init_duration: float = 2.0   # s
    max_accel: float = 8.0       # m/s^2
    max_yaw_rate: float = 1.5    # rad/s
    dropout_hold: float = 0.2    # s
    dropout_decay: float = 0.2   # s

    def params(self, mount_pitch: float) -> GuidanceParams:
        p = GuidanceParams(
            pn_gain=self.pn_gain,
            kp_yaw=self.kp_yaw,
            k_heading=self.k_heading,
            suppression=self.suppression,
            init_duration=self.init_duration,
            max_accel=self.max_accel,
            max_yaw_rate=self.max_yaw_rate,
            mount_pitch=mount_pitch,
            dropout_hold=self.dropout_hold,
            dropout_decay=self.dropout_decay,
        )
        p.validate()
        return p


@dataclass
class TrajectoryConfig:
    horizon: float = 2.0         # s, generated trajectory length
    dt: float = 0.1              # s, waypoint discretization
    replan_hz: float = 10.0
    lookahead_buffer: float = 0.05  # s on top of one replan period


@dataclass
class GainsConfig:
    pos_kp: float = 1.2
    pos_ki: float = 0.0
    pos_kd: float = 0.0
    vel_kp: float = 5.0
    vel_ki: float = 0.3
    vel_kd: float = 0.0
    ff_weight: float = 1.0
    yaw_kp: float = 1.5
    integrator_limit: float = 2.0

    def controller_gains(self) -> ControllerGains:
        g = ControllerGains(
            position=PidGains(self.pos_kp, self.pos_ki, self.pos_kd),
            velocity=PidGains(self.vel_kp, self.vel_ki, self.vel_kd),
            ff_weight=self.ff_weight,
            yaw_kp=self.yaw_kp,
            integrator_limit=self.integrator_limit,
        )
        g.validate()
        return g


@dataclass
class VehicleConfig:
    tau_attitude: float = 0.15
    drag: float = 0.3
    tilt_limit_deg: float = 35.0
    hover_thrust: float = 0.5
    max_yaw_rate: float = 2.0
    gains: GainsConfig = field(default_factory=GainsConfig)

    def params(self) -> VehicleParams:
        return VehicleParams(
            tau_attitude=self.tau_attitude,
            drag=self.drag,
            tilt_limit=math.radians(self.tilt_limit_deg),
            hover_thrust=self.hover_thrust,
            max_yaw_rate=self.max_yaw_rate,
        )


@dataclass
class RatesConfig:
    dynamics_hz: int = 200
    control_hz: int = 50
    perception_hz: int = 30


@dataclass
class RulesConfig:
    hit_radius: float = 0.5          # m, UAV center to target surface
    pursuit_timeout: float = 20.0    # s from guidance handoff
    bounds_x: float = 35.0           # m, box surrounding the target path
    bounds_y: float = 100.0
    bounds_z: float = 40.0
    fov_loss_timeout: float = 3.0    # s of continuous lost sight
    crash_accel_g: float = 10.0
    crash_sustain: float = 0.5       # s above the limit before declaring a crash
    ideal_velocity_tau: float = 0.3  # s, velocity-command tracking in ideal mode


@dataclass
class SimConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    rules: RulesConfig = field(default_factory=RulesConfig)


def _from_dict(cls: type, data: dict[str, Any]) -> Any:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key not in fields:
            raise ValueError(f"unknown config key {cls.__name__}.{key}")
        ftype = fields[key].type
        if isinstance(value, dict):
            subcls = {
                "camera": CameraConfig,
                "perception": PerceptionConfig,
                "guidance": GuidanceConfig,
                "trajectory": TrajectoryConfig,
                "vehicle": VehicleConfig,
                "rates": RatesConfig,
                "rules": RulesConfig,
                "gains": GainsConfig,
            }.get(key)
            if subcls is None:
                raise ValueError(f"unexpected nested config at {cls.__name__}.{key}")
            kwargs[key] = _from_dict(subcls, value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return _from_dict(SimConfig, data)


def config_to_dict(cfg: SimConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def dump_config(cfg: SimConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")

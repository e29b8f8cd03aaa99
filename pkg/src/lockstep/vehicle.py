"""Kinematic Ackermann vehicle with four PID-servoed joints.

This is a deliberately kinematic model: no mass, no slip, no suspension.
Speed is exactly wheel_radius * mean(rear wheel speed) at every step, which
keeps the expected trajectories analytic for tests. Joints track their
setpoints through PID controllers whose outputs are interpreted as
kinematic rates:

  * position joints (the two steering joints): PID output is an angular
    velocity command, clamped to steer_rate_limit, and integration never
    crosses the setpoint within one step (prevents discrete-time chatter
    at high proportional gains);
  * velocity joints (the two rear wheels): PID output is an angular
    acceleration command, clamped to wheel_accel_limit.

Default gains are P=10 for wheels and P=40000, I=200, D=1 for steering,
with integral limits disabled (i_min == i_max == 0 means no clamping).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .datapacks import JointCommand, JointTargetType, LinkState

__all__ = [
    "AckermannVehicle",
    "PIDController",
    "VehicleParams",
    "VehicleState",
    "JOINT_PREFIX",
    "REAR_LEFT_WHEEL",
    "REAR_RIGHT_WHEEL",
    "FRONT_LEFT_STEERING",
    "FRONT_RIGHT_STEERING",
    "ackermann_effective_angle",
    "pid_step",
    "step_vehicle",
    "wrap_angle",
]

JOINT_PREFIX = "smart_car_joint_plugin::"
REAR_LEFT_WHEEL = JOINT_PREFIX + "rear_left_wheel_joint"
REAR_RIGHT_WHEEL = JOINT_PREFIX + "rear_right_wheel_joint"
FRONT_LEFT_STEERING = JOINT_PREFIX + "front_left_steering_joint"
FRONT_RIGHT_STEERING = JOINT_PREFIX + "front_right_steering_joint"

JOINT_NAMES = (
    REAR_LEFT_WHEEL,
    REAR_RIGHT_WHEEL,
    FRONT_LEFT_STEERING,
    FRONT_RIGHT_STEERING,
)


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]; the tie at pi maps to +pi."""
    r = math.remainder(a, math.tau)
    if r <= -math.pi:
        r += math.tau
    return r


@dataclass
class PIDController:
    """Discrete PID with optional integral clamping.

    Bounds of i_min == i_max == 0 disable the clamp entirely.
    """

    p: float
    i: float = 0.0
    d: float = 0.0
    target_type: JointTargetType = JointTargetType.POSITION
    i_max: float = 0.0
    i_min: float = 0.0
    integral: float = 0.0
    prev_error: float = 0.0

    def step(self, setpoint: float, measured: float, dt: float) -> float:
        if dt <= 0:
            raise ValueError("dt must be > 0")
        error = setpoint - measured
        self.integral += error * dt
        if not (self.i_max == 0.0 and self.i_min == 0.0):
            self.integral = min(self.i_max, max(self.i_min, self.integral))
        derivative = (error - self.prev_error) / dt
        self.prev_error = error
        return self.p * error + self.i * self.integral + self.d * derivative

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = 0.0


def pid_step(pid: PIDController, setpoint: float, measured: float, dt: float) -> float:
    return pid.step(setpoint, measured, dt)


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 1.0  # m
    track: float = 0.6  # m
    wheel_radius: float = 0.15  # m
    max_steer: float = 0.6  # rad
    steer_rate_limit: float = 10.0  # rad/s
    wheel_accel_limit: float = 50.0  # rad/s^2

    def __post_init__(self):
        for name in ("wheelbase", "track", "wheel_radius", "max_steer",
                     "steer_rate_limit", "wheel_accel_limit"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_steer >= math.pi / 2:
            raise ValueError("max_steer must be below pi/2")


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    steer_left: float = 0.0  # rad
    steer_right: float = 0.0  # rad
    omega_rl: float = 0.0  # rad/s
    omega_rr: float = 0.0  # rad/s


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, v))


def ackermann_effective_angle(steer_left: float, steer_right: float,
                              wheelbase: float, track: float) -> float:
    """Effective bicycle steering angle from two front wheel angles.

    Each wheel angle is converted to an estimate of the bicycle cotangent
    (cot of the inner wheel is cot(delta) - W/2L, of the outer wheel
    cot(delta) + W/2L); estimates are averaged. Exact on Ackermann-consistent
    pairs, graceful on inconsistent ones. Near-zero angles carry no usable
    cotangent and are skipped; if both are near zero the result is 0.
    """
    half_ratio = track / (2.0 * wheelbase)
    sign = 1.0 if steer_left + steer_right >= 0 else -1.0
    estimates = []
    for angle, is_left in ((steer_left, True), (steer_right, False)):
        if abs(angle) < 1e-12:
            continue
        inner = (sign > 0) == is_left  # left wheel is inner on a left turn
        cot = 1.0 / math.tan(abs(angle))
        estimates.append(cot + half_ratio if inner else cot - half_ratio)
    if not estimates:
        return 0.0
    mean_cot = sum(estimates) / len(estimates)
    if mean_cot < 1e-9:
        mean_cot = 1e-9  # angles beyond the geometric limit; saturate
    return sign * math.atan(1.0 / mean_cot)


class AckermannVehicle:
    """Vehicle model: joint servos plus planar bicycle kinematics."""

    def __init__(self, params: VehicleParams = VehicleParams(),
                 state: VehicleState = VehicleState()):
        self.params = params
        self.state = state
        self.targets: dict[str, float] = {name: 0.0 for name in JOINT_NAMES}
        self._pids = {
            REAR_LEFT_WHEEL: PIDController(p=10.0, target_type=JointTargetType.VELOCITY),
            REAR_RIGHT_WHEEL: PIDController(p=10.0, target_type=JointTargetType.VELOCITY),
            FRONT_LEFT_STEERING: PIDController(p=40000.0, i=200.0, d=1.0),
            FRONT_RIGHT_STEERING: PIDController(p=40000.0, i=200.0, d=1.0),
        }

    def apply_commands(self, commands: list[JointCommand]) -> None:
        """Record new setpoints; unknown joint names are ignored."""
        for cmd in commands:
            if cmd.joint_name in self.targets:
                self.targets[cmd.joint_name] = cmd.target_value

    def _servo_position(self, pid: PIDController, current: float, target: float,
                        dt: float) -> float:
        rate = _clamp(pid.step(target, current, dt),
                      -self.params.steer_rate_limit, self.params.steer_rate_limit)
        new = current + rate * dt
        # never cross the setpoint within one step
        if (current <= target <= new) or (new <= target <= current):
            new = target
        return _clamp(new, -self.params.max_steer, self.params.max_steer)

    def _servo_velocity(self, pid: PIDController, current: float, target: float,
                        dt: float) -> float:
        accel = _clamp(pid.step(target, current, dt),
                       -self.params.wheel_accel_limit, self.params.wheel_accel_limit)
        return current + accel * dt

    def step(self, dt: float) -> VehicleState:
        """Advance joints then pose by one Euler step of dt seconds."""
        if dt <= 0:
            raise ValueError("dt must be > 0")
        s, p = self.state, self.params

        steer_l = self._servo_position(
            self._pids[FRONT_LEFT_STEERING], s.steer_left,
            _clamp(self.targets[FRONT_LEFT_STEERING], -p.max_steer, p.max_steer), dt)
        steer_r = self._servo_position(
            self._pids[FRONT_RIGHT_STEERING], s.steer_right,
            _clamp(self.targets[FRONT_RIGHT_STEERING], -p.max_steer, p.max_steer), dt)
        omega_rl = self._servo_velocity(
            self._pids[REAR_LEFT_WHEEL], s.omega_rl, self.targets[REAR_LEFT_WHEEL], dt)
        omega_rr = self._servo_velocity(
            self._pids[REAR_RIGHT_WHEEL], s.omega_rr, self.targets[REAR_RIGHT_WHEEL], dt)

        v = p.wheel_radius * (omega_rl + omega_rr) / 2.0
        delta = ackermann_effective_angle(steer_l, steer_r, p.wheelbase, p.track)
        self.state = VehicleState(
            x=s.x + v * math.cos(s.yaw) * dt,
            y=s.y + v * math.sin(s.yaw) * dt,
            yaw=wrap_angle(s.yaw + (v / p.wheelbase) * math.tan(delta) * dt),
            steer_left=steer_l,
            steer_right=steer_r,
            omega_rl=omega_rl,
            omega_rr=omega_rr,
        )
        return self.state

    def speed(self) -> float:
        return self.params.wheel_radius * (self.state.omega_rl + self.state.omega_rr) / 2.0

    def yaw_rate(self) -> float:
        delta = ackermann_effective_angle(
            self.state.steer_left, self.state.steer_right,
            self.params.wheelbase, self.params.track)
        return (self.speed() / self.params.wheelbase) * math.tan(delta)

    def link_state(self) -> LinkState:
        """Pose and twist of the chassis as a planar (z = 0) link."""
        s = self.state
        v = self.speed()
        return LinkState(
            pos=(s.x, s.y, 0.0),
            rot=(0.0, 0.0, math.sin(s.yaw / 2.0), math.cos(s.yaw / 2.0)),
            lin_vel=(v * math.cos(s.yaw), v * math.sin(s.yaw), 0.0),
            ang_vel=(0.0, 0.0, self.yaw_rate()),
        )


def step_vehicle(vehicle: AckermannVehicle, commands: list[JointCommand],
                 dt: float) -> VehicleState:
    """Apply commands and advance one step; convenience wrapper."""
    vehicle.apply_commands(commands)
    return vehicle.step(dt)


def publish_link_state(vehicle: AckermannVehicle) -> LinkState:
    return vehicle.link_state()

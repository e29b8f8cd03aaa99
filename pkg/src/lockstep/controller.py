"""Waypoint-following controller: pose in, steering/wheel commands out.

The controller consumes the vehicle pose (position plus an orientation
quaternion), walks a fixed list of waypoints, and emits a steering angle
pair plus a constant cruise wheel speed. A waypoint counts as reached when
the vehicle is inside a closed ball of arrival_radius around it (distance
equal to the radius counts). There is no longitudinal control here; wheel
speed servoing happens inside the vehicle model.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import DegenerateTarget, ZeroQuaternion
from .vehicle import wrap_angle

__all__ = [
    "ControllerState",
    "Trajectory",
    "ackermann_split",
    "advance_waypoint",
    "densify_polygon",
    "load_trajectory_csv",
    "quaternion_to_yaw",
    "steering_command",
    "trajectory_to_csv",
]

DEFAULT_ARRIVAL_RADIUS = 0.8  # m
DEFAULT_CRUISE_SPEED = 2.0  # m/s
DEFAULT_HEADING_GAIN = 1.5


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[tuple[float, float], ...]
    arrival_radius: float = DEFAULT_ARRIVAL_RADIUS

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        if self.arrival_radius <= 0:
            raise ValueError("arrival_radius must be positive")
        for x, y in self.waypoints:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("waypoints must be finite")

    def __len__(self) -> int:
        return len(self.waypoints)


@dataclass(frozen=True)
class ControllerState:
    current_index: int = 0
    finished: bool = False
    heading_gain: float = DEFAULT_HEADING_GAIN


def quaternion_to_yaw(q: tuple[float, float, float, float]) -> float:
    """Yaw (rotation about z) of a quaternion given in (x, y, z, w) order.

    The quaternion is normalized first; a zero quaternion has no
    orientation and raises ZeroQuaternion. Result lies in (-pi, pi].
    """
    x, y, z, w = q
    norm = math.sqrt(x * x + y * y + z * z + w * w)
    if norm < 1e-9:
        raise ZeroQuaternion("cannot extract yaw from a zero quaternion")
    x, y, z, w = x / norm, y / norm, z / norm, w / norm
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return wrap_angle(yaw)


def advance_waypoint(traj: Trajectory, cs: ControllerState,
                     pos: tuple[float, float]) -> ControllerState:
    """Consume every leading waypoint within the arrival ball of pos."""
    if cs.finished:
        raise ValueError("trajectory already finished")
    index = cs.current_index
    x, y = pos
    while index < len(traj.waypoints):
        wx, wy = traj.waypoints[index]
        if math.hypot(wx - x, wy - y) <= traj.arrival_radius:
            index += 1
        else:
            break
    return replace(cs, current_index=index, finished=index == len(traj.waypoints))


def steering_command(pos: tuple[float, float], yaw: float,
                     target: tuple[float, float], gain: float,
                     max_steer: float) -> float:
    """Proportional heading controller, clamped to the steering range."""
    dx, dy = target[0] - pos[0], target[1] - pos[1]
    if math.hypot(dx, dy) < 1e-9:
        raise DegenerateTarget("target coincides with current position")
    heading_error = wrap_angle(math.atan2(dy, dx) - yaw)
    return min(max_steer, max(-max_steer, gain * heading_error))


def ackermann_split(delta: float, wheelbase: float, track: float) -> tuple[float, float]:
    """Split a bicycle steering angle into (left, right) wheel angles.

    The inner wheel turns more: cot(inner) = cot|delta| - W/2L and
    cot(outer) = cot|delta| + W/2L, with signs restored afterwards. The
    left wheel is the inner one on a left turn (delta > 0).
    """
    if abs(delta) >= math.pi / 2:
        raise ValueError("|delta| must be below pi/2")
    if delta == 0.0:
        return (0.0, 0.0)
    half_ratio = track / (2.0 * wheelbase)
    cot = 1.0 / math.tan(abs(delta))
    inner = math.atan(1.0 / (cot - half_ratio)) if cot - half_ratio > 1e-12 else math.pi / 2
    outer = math.atan(1.0 / (cot + half_ratio))
    sign = 1.0 if delta > 0 else -1.0
    if sign > 0:
        return (sign * inner, sign * outer)
    return (sign * outer, sign * inner)


# --- trajectory files and generators ------------------------------------------

def densify_polygon(corners: list[tuple[float, float]], spacing: float = 1.0,
                    close: bool = True) -> list[tuple[float, float]]:
    """Walk polygon edges emitting points every `spacing` meters.

    Each edge contributes its start vertex plus evenly spaced intermediate
    points; the final vertex is appended at the end. With close=True the
    polygon is closed back to the first corner first.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if len(corners) < 2:
        return list(corners)
    path = list(corners)
    if close and path[0] != path[-1]:
        path.append(path[0])
    points: list[tuple[float, float]] = []
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        length = math.hypot(x1 - x0, y1 - y0)
        steps = max(1, math.ceil(length / spacing))
        for k in range(steps):
            t = k / steps
            points.append((x0 + (x1 - x0) * t, y0 + (y1 - y0) * t))
    points.append(path[-1])
    return points


def trajectory_to_csv(points: list[tuple[float, float]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["x", "y"])
    for x, y in points:
        writer.writerow([repr(x) if isinstance(x, float) else x,
                         repr(y) if isinstance(y, float) else y])
    return out.getvalue()


def load_trajectory_csv(path: str | Path,
                        arrival_radius: float = DEFAULT_ARRIVAL_RADIUS) -> Trajectory:
    """Load waypoints from a CSV file with an `x,y` header row."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows or [c.strip().lower() for c in rows[0][:2]] != ["x", "y"]:
        raise ValueError(f"{path}: expected a CSV with an 'x,y' header")
    waypoints = []
    for row in rows[1:]:
        try:
            waypoints.append((float(row[0]), float(row[1])))
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}: bad waypoint row {row!r}: {exc}") from None
    return Trajectory(tuple(waypoints), arrival_radius)

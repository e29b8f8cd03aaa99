"""Built-in engine scripts: vehicle, controller, camera, detector.

Each script adapts one domain model to the engine lifecycle and datapack
registry. All of them are deterministic: outputs depend only on the
incoming datapack sequence and the engine config.
"""

from __future__ import annotations

from .controller import (
    DEFAULT_ARRIVAL_RADIUS,
    DEFAULT_CRUISE_SPEED,
    DEFAULT_HEADING_GAIN,
    ControllerState,
    Trajectory,
    ackermann_split,
    advance_waypoint,
    load_trajectory_csv,
    quaternion_to_yaw,
    steering_command,
)
from .datapacks import CameraFrame, Doc
from .engine import EngineScript, register_engine_type
from .errors import ZeroQuaternion
from .perception import (
    DEFAULT_HEIGHT,
    DEFAULT_THRESHOLD,
    DEFAULT_WIDTH,
    ThresholdDetector,
    render_frame,
)
from .vehicle import (
    JOINT_NAMES,
    AckermannVehicle,
    VehicleParams,
    VehicleState,
)

LINK_STATE_NAME = "smart_car_link_plugin::base_link"
CAMERA_FRAME_NAME = "smart_camera::camera"

ACTORS_NAME = "actors"
STATE_LOCATION_NAME = "state_location"
CAMERA_IMG_NAME = "camera_img"
DETECTIONS_NAME = "detections"

ZERO_ACTORS = {"angular_L": 0.0, "angular_R": 0.0, "linear_L": 0.0, "linear_R": 0.0}
ZERO_STATE_LOCATION = {
    "location_x": 0.0,
    "location_y": 0.0,
    "qtn_x": 0.0,
    "qtn_y": 0.0,
    "qtn_z": 0.0,
    "qtn_w": 0.0,
}


@register_engine_type("vehicle_sim")
class VehicleEngine(EngineScript):
    """Ackermann vehicle behind the engine protocol.

    Exposes the chassis pose as a link-state datapack and accepts four
    joint commands named after the steering/wheel joints. Extra keys:
    Wheelbase, Track, WheelRadius, MaxSteer, SteerRateLimit,
    WheelAccelLimit, StartX, StartY, StartYaw.
    """

    def __init__(self, engine_name: str, extra: dict | None = None):
        super().__init__(engine_name, extra)
        defaults = VehicleParams()
        self.vehicle = AckermannVehicle(
            params=VehicleParams(
                wheelbase=float(self.extra.get("Wheelbase", defaults.wheelbase)),
                track=float(self.extra.get("Track", defaults.track)),
                wheel_radius=float(self.extra.get("WheelRadius", defaults.wheel_radius)),
                max_steer=float(self.extra.get("MaxSteer", defaults.max_steer)),
                steer_rate_limit=float(
                    self.extra.get("SteerRateLimit", defaults.steer_rate_limit)),
                wheel_accel_limit=float(
                    self.extra.get("WheelAccelLimit", defaults.wheel_accel_limit)),
            ),
            state=VehicleState(
                x=float(self.extra.get("StartX", 0.0)),
                y=float(self.extra.get("StartY", 0.0)),
                yaw=float(self.extra.get("StartYaw", 0.0)),
            ),
        )

    def initialize(self):
        self.register_datapack(LINK_STATE_NAME, "link_state")
        self.set_datapack(LINK_STATE_NAME, self.vehicle.link_state())
        for joint in JOINT_NAMES:
            self.register_datapack(joint, "joint_command")

    def run_loop(self, timestep_ns: int):
        commands = []
        for joint in JOINT_NAMES:
            cmd = self.get_datapack(joint)
            if cmd is not None:
                commands.append(cmd)
        self.vehicle.apply_commands(commands)
        self.vehicle.step(timestep_ns / 1e9)
        self.set_datapack(LINK_STATE_NAME, self.vehicle.link_state())


@register_engine_type("controller")
class ControllerEngine(EngineScript):
    """Waypoint follower reading a pose document, writing actor commands.

    The pose arrives in the "state_location" datapack; commands leave in
    "actors" with steering angles (rad) in angular_L/angular_R and wheel
    speeds (rad/s) in linear_L/linear_R. Until a pose with a usable
    (non-zero) quaternion arrives, the previous command is held, which on
    the first loop step means all zeros. Extra keys: TrajectoryFile
    (required), ArrivalRadius, CruiseSpeed, WheelRadius, HeadingGain,
    Wheelbase, Track, MaxSteer.
    """

    def __init__(self, engine_name: str, extra: dict | None = None):
        super().__init__(engine_name, extra)
        self.arrival_radius = float(self.extra.get("ArrivalRadius", DEFAULT_ARRIVAL_RADIUS))
        cruise_speed = float(self.extra.get("CruiseSpeed", DEFAULT_CRUISE_SPEED))
        wheel_radius = float(self.extra.get("WheelRadius", 0.15))
        self.cruise_omega = cruise_speed / wheel_radius
        self.heading_gain = float(self.extra.get("HeadingGain", DEFAULT_HEADING_GAIN))
        self.wheelbase = float(self.extra.get("Wheelbase", 1.0))
        self.track = float(self.extra.get("Track", 0.6))
        self.max_steer = float(self.extra.get("MaxSteer", 0.6))
        self.trajectory: Trajectory | None = None
        self.state = ControllerState(heading_gain=self.heading_gain)
        self.last_actors = dict(ZERO_ACTORS)
        self.index_history: list[tuple[int, int]] = []  # (run_loop call, index)
        self._run_calls = 0

    def initialize(self):
        path = self.extra.get("TrajectoryFile")
        if not path:
            raise ValueError("controller engine needs Extra.TrajectoryFile")
        self.trajectory = load_trajectory_csv(path, self.arrival_radius)
        self.register_datapack(ACTORS_NAME, "doc")
        self.set_datapack(ACTORS_NAME, Doc(dict(ZERO_ACTORS)))
        self.register_datapack(STATE_LOCATION_NAME, "doc")
        self.set_datapack(STATE_LOCATION_NAME, Doc(dict(ZERO_STATE_LOCATION)))

    def _pose(self) -> tuple[tuple[float, float], float] | None:
        """Position and yaw from the last received pose, if usable."""
        doc = self.get_datapack(STATE_LOCATION_NAME)
        if doc is None:
            return None
        try:
            q = (float(doc["qtn_x"]), float(doc["qtn_y"]),
                 float(doc["qtn_z"]), float(doc["qtn_w"]))
            pos = (float(doc["location_x"]), float(doc["location_y"]))
        except (KeyError, TypeError, ValueError):
            return None
        try:
            yaw = quaternion_to_yaw(q)
        except ZeroQuaternion:
            # zeroed quaternion: no pose has been routed to us yet
            return None
        return pos, yaw

    def run_loop(self, timestep_ns: int):
        pose = self._pose()
        if pose is None:
            actors = self.last_actors  # hold
        elif self.state.finished:
            actors = dict(ZERO_ACTORS)  # stop at the final destination
        else:
            pos, yaw = pose
            self.state = advance_waypoint(self.trajectory, self.state, pos)
            if self.state.finished:
                actors = dict(ZERO_ACTORS)
            else:
                target = self.trajectory.waypoints[self.state.current_index]
                delta = steering_command(pos, yaw, target,
                                         self.state.heading_gain, self.max_steer)
                left, right = ackermann_split(delta, self.wheelbase, self.track)
                # the inner wheel of a split exceeds the bicycle angle;
                # emitted joint angles stay inside the steering bound
                clamp = self.max_steer
                actors = {
                    "angular_L": min(clamp, max(-clamp, left)),
                    "angular_R": min(clamp, max(-clamp, right)),
                    "linear_L": self.cruise_omega,
                    "linear_R": self.cruise_omega,
                }
        self.index_history.append((self._run_calls, self.state.current_index))
        self._run_calls += 1
        self.last_actors = actors
        self.set_datapack(ACTORS_NAME, Doc(dict(actors)))


@register_engine_type("camera")
class CameraEngine(EngineScript):
    """Deterministic frame source. Extra keys: Width, Height."""

    def __init__(self, engine_name: str, extra: dict | None = None):
        super().__init__(engine_name, extra)
        self.width = int(self.extra.get("Width", DEFAULT_WIDTH))
        self.height = int(self.extra.get("Height", DEFAULT_HEIGHT))
        self._step_index = 0

    def initialize(self):
        self.register_datapack(CAMERA_FRAME_NAME, "camera_frame")

    def run_loop(self, timestep_ns: int):
        frame = render_frame(self._step_index, self.width, self.height)
        self._step_index += 1
        self.set_datapack(CAMERA_FRAME_NAME, frame)


@register_engine_type("detector")
class DetectorEngine(EngineScript):
    """Threshold detector consuming the lowered camera document.

    Expects "camera_img" with c_imageHeight, c_imageWidth and the raw
    pixel bytes in current_image_frame; publishes at most one detection
    per step in "detections" (empty when nothing is bright or no frame
    has arrived yet). Extra keys: Threshold.
    """

    def __init__(self, engine_name: str, extra: dict | None = None):
        super().__init__(engine_name, extra)
        self.detector = ThresholdDetector(int(self.extra.get("Threshold", DEFAULT_THRESHOLD)))

    def initialize(self):
        self.register_datapack(CAMERA_IMG_NAME, "doc")
        self.set_datapack(CAMERA_IMG_NAME, Doc({
            "c_imageHeight": 0,
            "c_imageWidth": 0,
            "current_image_frame": b"",
        }))
        self.register_datapack(DETECTIONS_NAME, "detection")
        self.detector.warm_up()

    def run_loop(self, timestep_ns: int):
        doc = self.get_datapack(CAMERA_IMG_NAME)
        detection = None
        if doc is not None:
            try:
                height = int(doc["c_imageHeight"])
                width = int(doc["c_imageWidth"])
                data = bytes(doc["current_image_frame"])
            except (KeyError, TypeError, ValueError):
                height = width = 0
                data = b""
            if height > 0 and width > 0 and len(data) == height * width * 3:
                frame = CameraFrame(height, width, 3, data)
                found = self.detector.detect(frame)
                detection = found[0] if found else None
        self.set_datapack(DETECTIONS_NAME, detection)

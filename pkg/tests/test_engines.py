"""Script-level tests for the built-in engines (no transport involved)."""

import math

import pytest

from lockstep.controller import trajectory_to_csv
from lockstep.datapacks import Doc, JointCommand, JointTargetType
from lockstep.engines import (
    ACTORS_NAME,
    CAMERA_FRAME_NAME,
    CAMERA_IMG_NAME,
    DETECTIONS_NAME,
    LINK_STATE_NAME,
    STATE_LOCATION_NAME,
    ZERO_ACTORS,
    CameraEngine,
    ControllerEngine,
    DetectorEngine,
    VehicleEngine,
)
from lockstep.perception import render_frame
from lockstep.vehicle import REAR_LEFT_WHEEL, REAR_RIGHT_WHEEL

DT_NS = 10_000_000


def pose_doc(x, y, yaw):
    return Doc({
        "location_x": x,
        "location_y": y,
        "qtn_x": 0.0,
        "qtn_y": 0.0,
        "qtn_z": math.sin(yaw / 2),
        "qtn_w": math.cos(yaw / 2),
    })


class TestVehicleEngine:
    def test_initialize_registers_interface(self):
        engine = VehicleEngine("vehicle")
        engine.initialize()
        link = engine.get_datapack(LINK_STATE_NAME)
        assert link.pos == (0.0, 0.0, 0.0)
        assert engine.get_datapack(REAR_LEFT_WHEEL) is None  # no command yet

    def test_run_loop_consumes_commands(self):
        engine = VehicleEngine("vehicle")
        engine.initialize()
        for joint in (REAR_LEFT_WHEEL, REAR_RIGHT_WHEEL):
            engine.set_datapack(
                joint, JointCommand(joint, JointTargetType.VELOCITY, 10.0))
        for _ in range(100):
            engine.run_loop(DT_NS)
        link = engine.get_datapack(LINK_STATE_NAME)
        assert link.pos[0] > 0.5  # accelerated and moved forward
        assert link.pos[1] == 0.0

    def test_extra_overrides_geometry(self):
        engine = VehicleEngine("vehicle", {"Wheelbase": 0.7, "MaxSteer": 0.9})
        assert engine.vehicle.params.wheelbase == 0.7
        assert engine.vehicle.params.max_steer == 0.9


class TestControllerEngine:
    def make(self, tmp_path, waypoints, **extra):
        path = tmp_path / "course.csv"
        path.write_text(trajectory_to_csv(waypoints))
        engine = ControllerEngine("controller", {"TrajectoryFile": str(path), **extra})
        engine.initialize()
        return engine

    def test_requires_trajectory_file(self):
        engine = ControllerEngine("controller", {})
        with pytest.raises(ValueError):
            engine.initialize()

    def test_holds_zero_before_first_pose(self, tmp_path):
        engine = self.make(tmp_path, [(10.0, 0.0)])
        engine.run_loop(DT_NS)
        assert engine.get_datapack(ACTORS_NAME) == Doc(dict(ZERO_ACTORS))

    def test_dead_ahead_waypoint_steers_straight(self, tmp_path):
        engine = self.make(tmp_path, [(10.0, 0.0)])
        engine.set_datapack(STATE_LOCATION_NAME, pose_doc(0.0, 0.0, 0.0))
        engine.run_loop(DT_NS)
        actors = engine.get_datapack(ACTORS_NAME)
        assert actors["angular_L"] == 0.0
        assert actors["angular_R"] == 0.0
        assert actors["linear_L"] == pytest.approx(engine.cruise_omega)
        assert actors["linear_R"] == pytest.approx(engine.cruise_omega)

    def test_finished_course_stops(self, tmp_path):
        engine = self.make(tmp_path, [(0.0, 0.0)])
        engine.set_datapack(STATE_LOCATION_NAME, pose_doc(0.0, 0.0, 0.0))
        engine.run_loop(DT_NS)
        assert engine.state.finished
        assert engine.get_datapack(ACTORS_NAME) == Doc(dict(ZERO_ACTORS))
        engine.run_loop(DT_NS)  # stays stopped
        assert engine.get_datapack(ACTORS_NAME) == Doc(dict(ZERO_ACTORS))

    def test_emitted_angles_respect_bound(self, tmp_path):
        engine = self.make(tmp_path, [(0.0, 20.0)], MaxSteer=0.9)
        engine.set_datapack(STATE_LOCATION_NAME, pose_doc(0.0, 0.0, 0.0))
        engine.run_loop(DT_NS)
        actors = engine.get_datapack(ACTORS_NAME)
        assert abs(actors["angular_L"]) <= 0.9
        assert abs(actors["angular_R"]) <= 0.9
        assert actors["angular_L"] == 0.9  # hard left, inner wheel saturated

    def test_cruise_derived_from_speed_and_radius(self, tmp_path):
        engine = self.make(tmp_path, [(10.0, 0.0)],
                           CruiseSpeed=3.0, WheelRadius=0.25)
        assert engine.cruise_omega == pytest.approx(12.0)


class TestCameraEngine:
    def test_first_frame_is_step_zero(self):
        engine = CameraEngine("camera", {"Width": 64, "Height": 32})
        engine.initialize()
        assert engine.get_datapack(CAMERA_FRAME_NAME) is None
        engine.run_loop(DT_NS)
        frame = engine.get_datapack(CAMERA_FRAME_NAME)
        assert frame == render_frame(0, 64, 32)
        engine.run_loop(DT_NS)
        assert engine.get_datapack(CAMERA_FRAME_NAME) == render_frame(1, 64, 32)


class TestDetectorEngine:
    def test_no_frame_means_no_detection(self):
        engine = DetectorEngine("detector")
        engine.initialize()
        engine.run_loop(DT_NS)
        assert engine.get_datapack(DETECTIONS_NAME) is None

    def test_detects_rendered_frame(self):
        engine = DetectorEngine("detector")
        engine.initialize()
        frame = render_frame(0, 64, 32)
        engine.set_datapack(CAMERA_IMG_NAME, Doc({
            "c_imageHeight": 32,
            "c_imageWidth": 64,
            "current_image_frame": frame.image_data,
        }))
        engine.run_loop(DT_NS)
        detection = engine.get_datapack(DETECTIONS_NAME)
        assert detection is not None
        assert (detection.x_min, detection.y_min) == (0, 0)
        assert detection.score == 1.0

    def test_garbage_document_is_ignored(self):
        engine = DetectorEngine("detector")
        engine.initialize()
        engine.set_datapack(CAMERA_IMG_NAME, Doc({"c_imageHeight": 4}))
        engine.run_loop(DT_NS)
        assert engine.get_datapack(DETECTIONS_NAME) is None

    def test_warmed_up_at_initialize(self):
        engine = DetectorEngine("detector")
        engine.initialize()
        assert engine.detector.warmed_up

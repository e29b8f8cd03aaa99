import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lockstep.controller import (
    ControllerState,
    Trajectory,
    ackermann_split,
    advance_waypoint,
    densify_polygon,
    load_trajectory_csv,
    quaternion_to_yaw,
    steering_command,
    trajectory_to_csv,
)
from lockstep.errors import DegenerateTarget, ZeroQuaternion

from reference import yaw_from_quaternion_matrix


class TestQuaternionToYaw:
    def test_identity(self):
        assert quaternion_to_yaw((0, 0, 0, 1)) == 0.0

    def test_quarter_turn(self):
        s = math.sqrt(2) / 2
        assert quaternion_to_yaw((0, 0, s, s)) == pytest.approx(
            yaw_from_quaternion_matrix((0, 0, s, s)), abs=1e-12)
        assert quaternion_to_yaw((0, 0, s, s)) == pytest.approx(math.pi / 2, abs=1e-9)

    def test_half_turn(self):
        assert quaternion_to_yaw((0, 0, 1, 0)) == pytest.approx(
            yaw_from_quaternion_matrix((0, 0, 1, 0)), abs=1e-12)
        assert quaternion_to_yaw((0, 0, 1, 0)) == pytest.approx(math.pi, abs=1e-9)

    def test_zero_quaternion_raises(self):
        with pytest.raises(ZeroQuaternion):
            quaternion_to_yaw((0.0, 0.0, 0.0, 0.0))

    def test_unnormalized_input_normalized_first(self):
        s = math.sqrt(2) / 2
        scaled = (0, 0, 3 * s, 3 * s)
        assert quaternion_to_yaw(scaled) == pytest.approx(math.pi / 2, abs=1e-9)

    def test_against_matrix_oracle_over_full_circle(self):
        for k in range(1000):
            yaw = -math.pi + (k + 1) * math.tau / 1000  # samples in (-pi, pi]
            q = (0.0, 0.0, math.sin(yaw / 2), math.cos(yaw / 2))
            got = quaternion_to_yaw(q)
            want = yaw_from_quaternion_matrix(q)
            # both live in (-pi, pi]; compare on the circle
            diff = (got - want + math.pi) % math.tau - math.pi
            assert abs(diff) <= 1e-9


class TestAdvanceWaypoint:
    def make(self, *points, radius=0.8):
        return Trajectory(tuple(points), arrival_radius=radius)

    def test_exact_hit_advances(self):
        traj = self.make((5.0, 5.0), (25.0, 5.0))
        cs = advance_waypoint(traj, ControllerState(), (5.0, 5.0))
        assert cs.current_index == 1
        assert not cs.finished

    def test_closed_ball_boundary(self):
        traj = self.make((0.0, 0.0), (50.0, 0.0))
        assert advance_waypoint(traj, ControllerState(), (0.79, 0.0)).current_index == 1
        assert advance_waypoint(traj, ControllerState(), (0.80, 0.0)).current_index == 1
        assert advance_waypoint(traj, ControllerState(), (0.81, 0.0)).current_index == 0

    def test_coincident_waypoints_consumed_together(self):
        traj = self.make((1.0, 0.0), (1.0, 0.0), (50.0, 0.0))
        cs = advance_waypoint(traj, ControllerState(), (1.0, 0.0))
        assert cs.current_index == 2

    def test_finishes_when_list_exhausted(self):
        traj = self.make((0.0, 0.0))
        cs = advance_waypoint(traj, ControllerState(), (0.0, 0.0))
        assert cs.finished and cs.current_index == 1

    def test_advancing_finished_state_raises(self):
        traj = self.make((0.0, 0.0))
        cs = advance_waypoint(traj, ControllerState(), (0.0, 0.0))
        with pytest.raises(ValueError):
            advance_waypoint(traj, cs, (0.0, 0.0))

    @given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
                    min_size=1, max_size=8))
    def test_index_monotone(self, points):
        traj = self.make(*points)
        cs = ControllerState()
        last = 0
        while not cs.finished:
            cs = advance_waypoint(traj, cs, (0.0, 0.0))
            assert cs.current_index >= last
            last = cs.current_index
            if cs.current_index < len(points):
                break  # next waypoint is out of reach from the origin


class TestSteeringCommand:
    def test_dead_ahead(self):
        assert steering_command((0, 0), 0.0, (10, 0), 1.5, 0.6) == 0.0

    def test_hard_left_clamped(self):
        delta = steering_command((0, 0), 0.0, (0, 5), 1.5, 0.6)
        assert delta == 0.6

    def test_proportional_response(self):
        # heading error of 0.2 rad, gain 1.5
        target = (math.cos(0.2), math.sin(0.2))
        delta = steering_command((0, 0), 0.0, target, 1.5, 0.6)
        assert delta == pytest.approx(0.3, abs=1e-12)

    def test_degenerate_target(self):
        with pytest.raises(DegenerateTarget):
            steering_command((1, 1), 0.0, (1, 1), 1.5, 0.6)


class TestAckermannSplit:
    def test_zero(self):
        assert ackermann_split(0.0, 1.0, 0.6) == (0.0, 0.0)

    def test_formula_values(self):
        left, right = ackermann_split(0.2, 1.0, 0.6)
        cot = 1.0 / math.tan(0.2)
        assert left == pytest.approx(math.atan(1.0 / (cot - 0.3)), abs=1e-12)
        assert right == pytest.approx(math.atan(1.0 / (cot + 0.3)), abs=1e-12)
        # inner (left on a left turn) turns more
        assert left > 0.2 > right
        assert left == pytest.approx(0.2126, abs=5e-4)
        assert right == pytest.approx(0.1888, abs=5e-4)

    def test_right_turn_mirrors_left(self):
        ll, lr = ackermann_split(0.2, 1.0, 0.6)
        rl, rr = ackermann_split(-0.2, 1.0, 0.6)
        assert rl == -lr and rr == -ll

    def test_rejects_right_angle(self):
        with pytest.raises(ValueError):
            ackermann_split(math.pi / 2, 1.0, 0.6)


class TestTrajectoryHelpers:
    def test_densify_rectangle(self):
        corners = [(0.0, 0.0), (20.0, 0.0), (20.0, 20.0), (0.0, 20.0)]
        points = densify_polygon(corners, spacing=1.0)
        assert len(points) == 81  # 4 sides x 20 points + closing vertex
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (0.0, 0.0)
        assert points[20] == (20.0, 0.0)
        for (x0, y0), (x1, y1) in zip(points, points[1:]):
            assert math.hypot(x1 - x0, y1 - y0) <= 1.0 + 1e-9

    def test_densify_requires_positive_spacing(self):
        with pytest.raises(ValueError):
            densify_polygon([(0, 0), (1, 0)], spacing=0.0)

    def test_csv_roundtrip(self, tmp_path):
        points = densify_polygon([(0.0, 0.0), (3.5, 0.25)], spacing=1.0, close=False)
        path = tmp_path / "traj.csv"
        path.write_text(trajectory_to_csv(points))
        traj = load_trajectory_csv(path)
        assert traj.waypoints == tuple(points)
        assert traj.arrival_radius == 0.8

    def test_csv_requires_header(self, tmp_path):
        path = tmp_path / "traj.csv"
        path.write_text("1.0,2.0\n")
        with pytest.raises(ValueError):
            load_trajectory_csv(path)

    def test_trajectory_needs_waypoints(self):
        with pytest.raises(ValueError):
            Trajectory(())

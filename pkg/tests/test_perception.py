import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lockstep.datapacks import CameraFrame
from lockstep.errors import LengthMismatch, UnsupportedDepth
from lockstep.perception import (
    ThresholdDetector,
    check_frame,
    detect_stub,
    flatten_grid,
    render_frame,
    reshape_frame,
    reverse_channels,
    target_rect,
)

from reference import brute_force_detect


class TestRenderFrame:
    def test_full_resolution_length(self):
        frame = render_frame(0, 736, 480)
        assert len(frame.image_data) == 1_059_840
        assert (frame.image_height, frame.image_width, frame.image_depth) == (480, 736, 3)

    def test_step_zero_corner_pixel(self):
        frame = render_frame(0, 736, 480)
        assert frame.image_data[0:3] == bytes([230, 230, 230])
        x0, y0, _, _ = target_rect(0, 736, 480)
        assert (x0, y0) == (0, 0)

    def test_determinism(self):
        assert render_frame(7, 64, 48).image_data == render_frame(7, 64, 48).image_data

    def test_rect_walks_the_grid(self):
        positions = {target_rect(k, 64, 64)[:2] for k in range(64)}
        assert len(positions) == 64
        assert target_rect(64, 64, 64)[:2] == target_rect(0, 64, 64)[:2]

    def test_minimum_resolution(self):
        with pytest.raises(ValueError):
            render_frame(0, 4, 32)

    def test_non_multiple_of_32_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="lockstep.perception"):
            check_frame(render_frame(0, 40, 32))
        assert any("multiples of 32" in r.message for r in caplog.records)


class TestReshape:
    def test_index_arithmetic(self):
        frame = CameraFrame(2, 2, 3, bytes(range(12)))
        grid = reshape_frame(frame)
        assert tuple(grid[1][0]) == (6, 7, 8)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            reshape_frame(CameraFrame(2, 2, 3, bytes(11)))

    @settings(max_examples=100, deadline=None)
    @given(
        h=st.integers(1, 8), w=st.integers(1, 8), d=st.integers(1, 4),
        seed=st.integers(0, 2**31),
    )
    def test_flatten_reshape_roundtrip(self, h, w, d, seed):
        rng = np.random.default_rng(seed)
        data = rng.integers(0, 256, size=h * w * d, dtype=np.uint8).tobytes()
        frame = CameraFrame(h, w, d, data)
        assert flatten_grid(reshape_frame(frame)) == frame


class TestReverseChannels:
    def test_pixel_swapped(self):
        frame = CameraFrame(1, 1, 3, bytes([1, 2, 3]))
        assert tuple(reverse_channels(reshape_frame(frame))[0][0]) == (3, 2, 1)

    def test_involution(self):
        grid = reshape_frame(render_frame(3, 32, 32))
        assert np.array_equal(reverse_channels(reverse_channels(grid)), grid)

    def test_gray_pixel_fixed_point(self):
        frame = CameraFrame(1, 1, 3, bytes([5, 5, 5]))
        assert tuple(reverse_channels(reshape_frame(frame))[0][0]) == (5, 5, 5)

    def test_depth_guard(self):
        frame = CameraFrame(1, 1, 1, bytes([9]))
        with pytest.raises(UnsupportedDepth):
            reverse_channels(reshape_frame(frame))


class TestDetector:
    def test_step_zero_box_on_full_frame(self):
        frame = render_frame(0, 736, 480)
        dets = detect_stub(frame)
        assert len(dets) == 1
        det = dets[0]
        assert (det.x_min, det.y_min, det.x_max, det.y_max) == (0, 0, 91, 59)
        assert det.score == 1.0
        box, score = brute_force_detect(frame)
        assert box == (0, 0, 91, 59) and score == 1.0

    def test_all_dark(self):
        assert detect_stub(CameraFrame(4, 4, 3, bytes(48))) == []

    def test_all_bright(self):
        dets = detect_stub(CameraFrame(4, 4, 3, bytes([255] * 48)))
        assert len(dets) == 1
        det = dets[0]
        assert (det.x_min, det.y_min, det.x_max, det.y_max) == (0, 0, 3, 3)
        assert det.score == 1.0

    def test_matches_brute_force_on_rendered_frames(self):
        detector = ThresholdDetector()
        detector.warm_up()
        for step in range(100):
            frame = render_frame(step, 64, 48)
            dets = detector.detect(frame)
            expected = brute_force_detect(frame)
            assert expected is not None and len(dets) == 1
            det = dets[0]
            assert (det.x_min, det.y_min, det.x_max, det.y_max) == expected[0]
            assert det.score == pytest.approx(expected[1], abs=1e-12)

    def test_matches_brute_force_on_random_noise(self):
        rng = np.random.default_rng(11)
        detector = ThresholdDetector()
        for _ in range(20):
            data = rng.integers(0, 256, size=6 * 9 * 3, dtype=np.uint8).tobytes()
            frame = CameraFrame(6, 9, 3, data)
            expected = brute_force_detect(frame)
            dets = detector.detect(frame)
            if expected is None:
                assert dets == []
            else:
                det = dets[0]
                assert (det.x_min, det.y_min, det.x_max, det.y_max) == expected[0]
                assert det.score == pytest.approx(expected[1], abs=1e-12)

    def test_threshold_drift_insensitive_on_scene_values(self):
        frame = render_frame(5, 64, 48)
        for threshold in (28, 128, 228):
            dets = detect_stub(frame, threshold)
            assert (dets[0].x_min, dets[0].y_min) == target_rect(5, 64, 48)[:2]

    def test_warm_up_is_observable_but_equivalent(self):
        cold = ThresholdDetector()
        warm = ThresholdDetector()
        warm.warm_up()
        assert not cold.warmed_up and warm.warmed_up
        frame = render_frame(2, 32, 32)
        assert cold.detect(frame) == warm.detect(frame)

    def test_depth_guard(self):
        with pytest.raises(UnsupportedDepth):
            detect_stub(CameraFrame(2, 2, 1, bytes(4)))

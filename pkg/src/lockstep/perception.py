"""Synthetic camera frames and a deterministic threshold detector.

The camera renders a dark background (value 20 in every channel) with one
bright rectangle (value 230) of size (width/8, height/8) whose top-left
corner walks a raster grid as a pure function of the step index, so every
frame is reproducible from (step, resolution) alone.

The detector binarizes on the per-pixel channel mean and reports the tight
bounding box of all bright pixels as a single detection whose score is the
bright fraction inside that box.
"""

from __future__ import annotations

import logging

import numpy as np

from .datapacks import CameraFrame, Detection
from .errors import LengthMismatch, UnsupportedDepth

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 736
DEFAULT_HEIGHT = 480
DEFAULT_THRESHOLD = 128
BACKGROUND_VALUE = 20
TARGET_VALUE = 230


def check_frame(frame: CameraFrame) -> None:
    """Validate buffer length; warn when dimensions are not multiples of 32."""
    expected = frame.image_height * frame.image_width * frame.image_depth
    if len(frame.image_data) != expected:
        raise LengthMismatch(
            f"image_data has {len(frame.image_data)} bytes, expected {expected}"
        )
    if frame.image_width % 32 or frame.image_height % 32:
        logger.warning(
            "frame %dx%d: dimensions are not multiples of 32",
            frame.image_width, frame.image_height,
        )


def target_rect(step_index: int, width: int, height: int) -> tuple[int, int, int, int]:
    """Top-left corner and size of the bright rectangle for a step index."""
    rect_w = width // 8
    rect_h = height // 8
    nx = width // rect_w
    ny = height // rect_h
    cell = step_index % (nx * ny)
    return (cell % nx) * rect_w, (cell // nx) * rect_h, rect_w, rect_h


def render_frame(step_index: int, width: int = DEFAULT_WIDTH,
                 height: int = DEFAULT_HEIGHT) -> CameraFrame:
    """Render the deterministic scene for one step."""
    if width < 8 or height < 8:
        raise ValueError("resolution must be at least 8x8")
    x0, y0, rect_w, rect_h = target_rect(step_index, width, height)
    img = np.full((height, width, 3), BACKGROUND_VALUE, dtype=np.uint8)
    img[y0:y0 + rect_h, x0:x0 + rect_w, :] = TARGET_VALUE
    frame = CameraFrame(height, width, 3, img.tobytes())
    check_frame(frame)
    return frame


def reshape_frame(frame: CameraFrame) -> np.ndarray:
    """View the flat pixel buffer as a (height, width, depth) uint8 grid."""
    expected = frame.image_height * frame.image_width * frame.image_depth
    if len(frame.image_data) != expected:
        raise LengthMismatch(
            f"image_data has {len(frame.image_data)} bytes, expected {expected}"
        )
    grid = np.frombuffer(frame.image_data, dtype=np.uint8)
    return grid.reshape((frame.image_height, frame.image_width, frame.image_depth))


def flatten_grid(grid: np.ndarray) -> CameraFrame:
    """Exact inverse of reshape_frame."""
    if grid.ndim != 3:
        raise ValueError("grid must be 3-dimensional")
    h, w, d = grid.shape
    return CameraFrame(h, w, d, np.ascontiguousarray(grid, dtype=np.uint8).tobytes())


def reverse_channels(grid: np.ndarray) -> np.ndarray:
    """Swap RGB and BGR channel order; an involution."""
    if grid.ndim != 3 or grid.shape[2] != 3:
        raise UnsupportedDepth("channel reversal needs depth 3")
    return grid[:, :, ::-1].copy()


class ThresholdDetector:
    """Bounding-box stub over a brightness threshold.

    warm_up() precomputes the channel-sum lookup table the detect path
    uses; calling detect without warming up gives identical results via a
    direct comparison, so the warm-up is observable only as a state flag.
    """

    def __init__(self, threshold: int = DEFAULT_THRESHOLD):
        self.threshold = threshold
        self._bright_lut: np.ndarray | None = None

    @property
    def warmed_up(self) -> bool:
        return self._bright_lut is not None

    def warm_up(self) -> None:
        # channel sums range 0..765; bright when mean >= threshold
        sums = np.arange(3 * 255 + 1)
        self._bright_lut = sums >= 3 * self.threshold

    def detect(self, frame: CameraFrame) -> list[Detection]:
        if frame.image_depth != 3:
            raise UnsupportedDepth("detector expects 3 channels per pixel")
        grid = reshape_frame(frame)
        sums = grid.astype(np.uint16).sum(axis=2)
        if self._bright_lut is not None:
            mask = self._bright_lut[sums]
        else:
            mask = sums >= 3 * self.threshold
        ys, xs = np.nonzero(mask)
        if ys.size == 0:
            return []
        x_min, x_max = int(xs.min()), int(xs.max())
        y_min, y_max = int(ys.min()), int(ys.max())
        box = mask[y_min:y_max + 1, x_min:x_max + 1]
        score = float(np.count_nonzero(box)) / box.size
        return [Detection(x_min, y_min, x_max, y_max, score, "target")]


def detect_stub(frame: CameraFrame, threshold: int = DEFAULT_THRESHOLD) -> list[Detection]:
    return ThresholdDetector(threshold).detect(frame)

"""Line-detector geometry and per-pixel response math.

The response at a pixel compares the brightest of 12 oriented line means
against the mean of the surrounding W-by-W window, at every odd line
length from 1 up to W. Lines are rasterized by stepping along the
dominant axis so each length-L line covers exactly L distinct pixels and
shorter lines nest inside longer ones at the same orientation. Sample
coordinates falling outside the image are clamped to the nearest edge
pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .imageio import GrayImage

ORIENTATION_COUNT = 12
ANGLE_STEP_DEGREES = 15.0


def round_half_away(v: float) -> int:
    """Round to the nearest integer with halves away from zero."""
    if v >= 0.0:
        return math.floor(v + 0.5)
    return math.ceil(v - 0.5)


@dataclass(frozen=True)
class MsldParams:
    """Detector configuration: window side W, fractional bits for fixed point.

    Scales are implied by the window: every odd length from 1 to W, which
    makes (W + 1) / 2 scales in total. The orientation count is fixed at 12
    (15 degree steps).
    """

    window: int = 15
    frac_bits: int = 18
    orientations: int = ORIENTATION_COUNT

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.frac_bits < 1:
            raise ValueError(f"frac_bits must be >= 1, got {self.frac_bits}")
        if self.orientations != ORIENTATION_COUNT:
            raise ValueError(f"orientations is fixed at {ORIENTATION_COUNT}")

    @property
    def scales(self) -> tuple[int, ...]:
        return tuple(range(1, self.window + 1, 2))

    @property
    def n_scales(self) -> int:
        return (self.window + 1) // 2

    @property
    def half(self) -> int:
        return (self.window - 1) // 2


@dataclass(frozen=True)
class LinePattern:
    """Pixel offsets of one oriented line, ordered along the dominant axis.

    Offsets are (dx, dy) relative to the line's center pixel, which sits at
    index (length - 1) / 2. The set is point-symmetric about the origin, and
    the pattern for length L is the central subset of the pattern for L + 2.
    """

    orientation_index: int
    length: int
    offsets: tuple[tuple[int, int], ...]


@lru_cache(maxsize=None)
def line_offsets(orientation_index: int, length: int) -> LinePattern:
    """Rasterize the line at angle orientation_index * 15 degrees.

    Steps j = -(L-1)/2 .. (L-1)/2 run along the dominant axis; the other
    coordinate is round(j * slope) with halves rounded away from zero.
    """
    if not 0 <= orientation_index < ORIENTATION_COUNT:
        raise ValueError(f"orientation_index must be 0..11, got {orientation_index}")
    if length < 1 or length % 2 == 0:
        raise ValueError(f"length must be odd and >= 1, got {length}")
    theta = math.radians(orientation_index * ANGLE_STEP_DEGREES)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    half = (length - 1) // 2
    offsets = []
    if abs(cos_t) >= abs(sin_t):
        slope = sin_t / cos_t
        for j in range(-half, half + 1):
            offsets.append((j, round_half_away(j * slope)))
    else:
        slope = cos_t / sin_t
        for j in range(-half, half + 1):
            offsets.append((round_half_away(j * slope), j))
    return LinePattern(orientation_index, length, tuple(offsets))


def _clamped(img: GrayImage, x: int, y: int) -> int:
    xc = 0 if x < 0 else (img.width - 1 if x >= img.width else x)
    yc = 0 if y < 0 else (img.height - 1 if y >= img.height else y)
    return int(img.pixels[yc, xc])


def window_mean(img: GrayImage, x: int, y: int, window: int) -> float:
    """Mean of the window*window box centered on (x, y), edge-clamped."""
    half = (window - 1) // 2
    total = 0
    for dy in range(-half, half + 1):
        for dx in range(-half, half + 1):
            total += _clamped(img, x + dx, y + dy)
    return total / (window * window)


def line_mean(img: GrayImage, x: int, y: int, pattern: LinePattern) -> float:
    """Mean intensity along one oriented line centered on (x, y), edge-clamped."""
    total = 0
    for dx, dy in pattern.offsets:
        total += _clamped(img, x + dx, y + dy)
    return total / pattern.length


@dataclass(frozen=True)
class RawResponse:
    """Per-scale raw responses at one pixel, with the intermediates kept."""

    responses: tuple[float, ...]
    window_mean: float
    line_maxima: tuple[float, ...]


def raw_response(img: GrayImage, x: int, y: int, params: MsldParams) -> RawResponse:
    """All per-scale responses at (x, y): max oriented line mean minus window mean.

    At scale 1 every line degenerates to the center pixel, so the response
    is the pixel value minus the window mean.
    """
    avg = window_mean(img, x, y, params.window)
    maxima = []
    for length in params.scales:
        best = max(
            line_mean(img, x, y, line_offsets(k, length))
            for k in range(ORIENTATION_COUNT)
        )
        maxima.append(best)
    responses = tuple(m - avg for m in maxima)
    return RawResponse(responses, avg, tuple(maxima))

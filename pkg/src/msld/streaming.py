"""Raster-order two-pass engine with bounded auxiliary memory.

Pass 1 sweeps the image once, computing every scale's raw response on the
fly behind a line buffer and accumulating per-scale sums and squared sums
over the ROI; finalizing them yields each scale's mean and standard
deviation. Pass 2 sweeps again, recomputes the identical raw responses,
and standardizes and combines them immediately, so no per-scale response
image is ever stored. Auxiliary state stays proportional to
window * image-width plus a handful of per-scale words, regardless of
image height.

Arithmetic runs either in IEEE doubles or in integer fixed point with a
configurable fractional width; divisions by the constant line lengths, the
window area, and the scale count are realized as multiplications by
precomputed reciprocals, while the data-dependent divisions (by the ROI
count and by each standard deviation) are true divisions.

The engine advances one image row per step and evaluates all columns of an
output row at once, so each register of the modeled dataflow widens into a
row vector and the pixel store keeps whole rows (window * ncols slots
instead of the architectural (window - 1) * ncols + window of LineBuffer).
The footprint reports the architectural slot count alongside the actual
bytes held.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .detector import ORIENTATION_COUNT, MsldParams, line_offsets
from .fixedpoint import (
    RAW_LIMIT,
    FixedPoint,
    FixedPointOverflowError,
    div_round_half_away_i64,
    fx_div,
    fx_from_int,
    fx_from_real,
    fx_mul,
    fx_reciprocal,
    fx_sqrt,
    fx_sub,
)
from .imageio import GrayImage, Mask
from .reference import DEGENERATE_STD, EmptyRoiError, ResponseMap, ScaleStats, _check_dims

ArithmeticMode = Literal["float", "fixed"]


def _validate_mode(mode: str):
    if mode not in ("float", "fixed"):
        raise ValueError(f"arithmetic_mode must be 'float' or 'fixed', got {mode!r}")


class LineBuffer:
    """Shift register of the (window - 1) * ncols + window most recent pixels.

    Sized so that the full window whose bottom-right corner is the most
    recently pushed pixel is available exactly when that pixel arrives; its
    center lies (window - 1) / 2 rows and columns behind the write cursor.
    """

    def __init__(self, window: int, ncols: int):
        if window < 3 or window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {window}")
        if ncols < 1:
            raise ValueError(f"ncols must be >= 1, got {ncols}")
        self.window = window
        self.ncols = ncols
        self.capacity = (window - 1) * ncols + window
        self._slots = np.zeros(self.capacity, dtype=np.int64)
        self._pushed = 0

    @property
    def pushed(self) -> int:
        return self._pushed

    @property
    def slots_used(self) -> int:
        return min(self._pushed, self.capacity)

    @property
    def window_ready(self) -> bool:
        return self._pushed >= self.capacity

    def push(self, value: int):
        self._slots[self._pushed % self.capacity] = value
        self._pushed += 1

    def window_pixels(self) -> np.ndarray:
        """The window whose bottom-right corner is the last pushed pixel."""
        if not self.window_ready:
            raise ValueError("window is not yet fully covered by pushed pixels")
        cursor = self._pushed - 1
        rows = cursor - (self.window - 1 - np.arange(self.window)) * self.ncols
        cols = -(self.window - 1 - np.arange(self.window))
        idx = (rows[:, None] + cols[None, :]) % self.capacity
        return self._slots[idx]


def line_sums_incremental(line_pixels: Sequence) -> list:
    """Per-scale sums of one oriented line, reusing each shorter scale.

    line_pixels holds W samples ordered along the line with the center at
    index (W - 1) / 2. The scale-1 sum is the center sample; each longer
    scale adds the next pair of endpoints to the previous sum.
    """
    n = len(line_pixels)
    if n < 1 or n % 2 == 0:
        raise ValueError(f"expected an odd number of samples, got {n}")
    half = (n - 1) // 2
    sums = [line_pixels[half]]
    for j in range(1, half + 1):
        sums.append(sums[-1] + line_pixels[half - j] + line_pixels[half + j])
    return sums


def rrcm_max_subtract(line_means: Sequence[float], window_mean: float) -> float:
    """Max of the twelve oriented line means minus the window mean.

    The maximum is reduced by comparing pairs, mirroring a comparator tree.
    """
    if len(line_means) != ORIENTATION_COUNT:
        raise ValueError(f"expected {ORIENTATION_COUNT} line means, got {len(line_means)}")
    level = list(line_means)
    while len(level) > 1:
        nxt = [max(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0] - window_mean


@dataclass(frozen=True)
class AllocationRecord:
    """One auxiliary buffer owned by the engine."""

    label: str
    elements: int
    nbytes: int


@dataclass(frozen=True)
class MemoryFootprint:
    """Peak auxiliary state of a streaming run.

    line_buffer_slots is the architectural pixel-store size
    (window - 1) * ncols + window; stored_stats_values counts the retained
    mean/std pairs (one per scale plus one for the inverted input channel);
    accumulator_words counts the running sums and the ROI counter;
    peak_total_bytes and allocations describe the buffers actually held.
    The input image and the output response map are excluded by definition.
    """

    line_buffer_slots: int
    accumulator_words: int
    stored_stats_values: int
    peak_total_bytes: int
    allocations: tuple[AllocationRecord, ...]

    @property
    def largest_allocation_elements(self) -> int:
        return max((a.elements for a in self.allocations), default=0)


class StreamAccumulators:
    """Running per-scale sums of ROI responses and their squares.

    In fixed mode the sums are exact Python integers over the raw
    fixed-point values; in float mode they are IEEE doubles accumulated in
    raster order. The ROI pixel count is shared across scales and counted
    once.
    """

    def __init__(self, n_scales: int, mode: ArithmeticMode, frac_bits: int | None):
        _validate_mode(mode)
        self.mode = mode
        self.frac_bits = frac_bits
        zero = 0 if mode == "fixed" else 0.0
        self.sum_x = [zero] * n_scales
        self.sum_x2 = [zero] * n_scales
        self.igc_sum = zero
        self.igc_sum2 = zero
        self.roi_count = 0

    @property
    def n_scales(self) -> int:
        return len(self.sum_x)

    @property
    def word_count(self) -> int:
        return 2 * (self.n_scales + 1) + 1

    def update_row(self, raw_rows: np.ndarray, igc_row: np.ndarray, roi_row: np.ndarray):
        n = int(np.count_nonzero(roi_row))
        if n == 0:
            return
        self.roi_count += n
        if self.mode == "fixed":
            shift = 1 << self.frac_bits
            for s in range(self.n_scales):
                vals = raw_rows[s][roi_row]
                self.sum_x[s] += int(vals.sum())
                self.sum_x2[s] += int(div_round_half_away_i64(vals * vals, shift).sum())
            ivals = igc_row[roi_row]
            self.igc_sum += int(ivals.sum())
            self.igc_sum2 += int(div_round_half_away_i64(ivals * ivals, shift).sum())
        else:
            for s in range(self.n_scales):
                vals = raw_rows[s][roi_row]
                self.sum_x[s] += float(vals.sum())
                self.sum_x2[s] += float((vals * vals).sum())
            ivals = igc_row[roi_row]
            self.igc_sum += float(ivals.sum())
            self.igc_sum2 += float((ivals * ivals).sum())

    def finalize(self) -> ScaleStats:
        if self.roi_count == 0:
            raise EmptyRoiError("mask contains no ROI pixels")
        clamps = 0
        means: list[float] = []
        stds: list[float] = []
        pairs = list(zip(self.sum_x + [self.igc_sum], self.sum_x2 + [self.igc_sum2]))
        if self.mode == "fixed":
            f = self.frac_bits
            n_fx = fx_from_int(self.roi_count, f)
            for sx, sx2 in pairs:
                m = fx_div(FixedPoint(sx, f), n_fx)
                var = fx_sub(fx_div(FixedPoint(sx2, f), n_fx), fx_mul(m, m))
                if var.raw < 0:
                    var = FixedPoint(0, f)
                    clamps += 1
                means.append(m.value)
                stds.append(fx_sqrt(var).value)
        else:
            for sx, sx2 in pairs:
                m = sx / self.roi_count
                var = sx2 / self.roi_count - m * m
                if var < 0.0:
                    var = 0.0
                    clamps += 1
                means.append(m)
                stds.append(np.sqrt(var))
        return ScaleStats(
            scale_means=tuple(means[:-1]),
            scale_stds=tuple(stds[:-1]),
            igc_mean=means[-1],
            igc_std=stds[-1],
            roi_count=self.roi_count,
            frac_bits=self.frac_bits,
            negative_variance_clamps=clamps,
        )


def _check_fixed_range(frac_bits: int):
    peak = 2 * (255 << frac_bits) ** 2 + (1 << frac_bits)
    if peak >= RAW_LIMIT:
        raise FixedPointOverflowError(
            f"frac_bits={frac_bits} exceeds the vectorized int64 range "
            "(squares of responses must fit a signed 64-bit word)"
        )


class _RowEngine:
    """One raster sweep producing raw-response rows for every scale.

    All registers are preallocated and reused row to row; the pixel store
    keeps the window most recent image rows.
    """

    def __init__(self, img: GrayImage, params: MsldParams, mode: ArithmeticMode):
        _validate_mode(mode)
        self.mode = mode
        self.params = params
        self.height, self.ncols = img.pixels.shape
        self._pixels = img.pixels
        window, half, n_scales = params.window, params.half, params.n_scales
        self.window, self.half, self.n_scales = window, half, n_scales

        if mode == "fixed":
            _check_fixed_range(params.frac_bits)
            f = params.frac_bits
            self.frac_bits = f
            self._scale_recips = np.array(
                [fx_reciprocal(length, f).raw for length in params.scales], dtype=np.int64
            )
            self._window_recip = fx_reciprocal(window * window, f).raw
            value_dtype = np.int64
        else:
            self.frac_bits = None
            self._scale_recips = np.array(
                [1.0 / length for length in params.scales], dtype=np.float64
            )
            self._window_recip = 1.0 / (window * window)
            value_dtype = np.float64

        self._offsets = [line_offsets(k, window).offsets for k in range(ORIENTATION_COUNT)]

        self._allocs: list[AllocationRecord] = []

        def register(label: str, arr: np.ndarray) -> np.ndarray:
            self._allocs.append(AllocationRecord(label, arr.size, arr.nbytes))
            return arr

        ncols = self.ncols
        self._row_store = register("row_store", np.zeros((window, ncols), dtype=np.int64))
        self._colmap = register(
            "column_index_maps",
            np.stack(
                [
                    np.clip(np.arange(ncols) + dx, 0, ncols - 1)
                    for dx in range(-half, half + 1)
                ]
            ).astype(np.intp),
        )
        self._samples = register("line_sample_rows", np.zeros((window, ncols), dtype=np.int64))
        self._line_sums = register("line_sum_rows", np.zeros((n_scales, ncols), dtype=np.int64))
        self._line_means = register("line_mean_rows", np.zeros((n_scales, ncols), dtype=value_dtype))
        self._line_max = register("line_max_rows", np.zeros((n_scales, ncols), dtype=value_dtype))
        self._colsum = register("window_column_sums", np.zeros(ncols, dtype=np.int64))
        self._extmap = register(
            "window_column_clamp_map",
            np.clip(np.arange(-half, ncols + half), 0, ncols - 1).astype(np.intp),
        )
        self._extcol = register("window_extended_sums", np.zeros(ncols + 2 * half, dtype=np.int64))
        self._wcumsum = register("window_rolling_sums", np.zeros(ncols + 2 * half + 1, dtype=np.int64))
        self._wmean = register("window_mean_row", np.zeros(ncols, dtype=value_dtype))
        self.raw_rows = register("raw_response_rows", np.zeros((n_scales, ncols), dtype=value_dtype))
        self.igc_row = register("channel_row", np.zeros(ncols, dtype=value_dtype))
        self.zsum_row = register("standardized_sum_row", np.zeros(ncols, dtype=value_dtype))
        self._pushed = -1

    @property
    def allocations(self) -> tuple[AllocationRecord, ...]:
        return tuple(self._allocs)

    def _row(self, y: int) -> np.ndarray:
        yc = min(max(y, 0), self.height - 1)
        return self._row_store[yc % self.window]

    def _push_through(self, target: int):
        target = min(target, self.height - 1)
        while self._pushed < target:
            self._pushed += 1
            np.copyto(self._row_store[self._pushed % self.window], self._pixels[self._pushed])

    def rows(self) -> Iterator[int]:
        """Yield each output row index after filling raw_rows and igc_row."""
        half, height = self.half, self.height
        for y in range(height):
            # The dropped row occupies exactly the slot the new push reuses,
            # so it must leave the column sums before the push happens.
            if y == 0:
                self._push_through(half)
                self._colsum[:] = 0
                for dy in range(-half, half + 1):
                    self._colsum += self._row(dy)
            else:
                self._colsum -= self._row(y - 1 - half)
                self._push_through(y + half)
                self._colsum += self._row(y + half)
            self._compute_output_row(y)
            yield y

    def _compute_output_row(self, y: int):
        half, window = self.half, self.window
        # window means from column sums via a rolling horizontal sum
        np.take(self._colsum, self._extmap, out=self._extcol)
        self._wcumsum[0] = 0
        np.cumsum(self._extcol, out=self._wcumsum[1:])
        window_sums = self._wcumsum[window:] - self._wcumsum[:-window]
        np.multiply(window_sums, self._window_recip, out=self._wmean)

        for k in range(ORIENTATION_COUNT):
            for i, (dx, dy) in enumerate(self._offsets[k]):
                np.take(self._row(y + dy), self._colmap[dx + half], out=self._samples[i])
            np.copyto(self._line_sums[0], self._samples[half])
            for j in range(1, half + 1):
                np.add(self._line_sums[j - 1], self._samples[half - j], out=self._line_sums[j])
                self._line_sums[j] += self._samples[half + j]
            np.multiply(self._line_sums, self._scale_recips[:, None], out=self._line_means)
            if k == 0:
                np.copyto(self._line_max, self._line_means)
            else:
                np.maximum(self._line_max, self._line_means, out=self._line_max)

        np.subtract(self._line_max, self._wmean[None, :], out=self.raw_rows)

        if self.mode == "fixed":
            np.left_shift(self._row(y), self.frac_bits, out=self.igc_row)
        else:
            np.copyto(self.igc_row, self._row(y))


def _run_pass1(engine: _RowEngine, mask: Mask) -> ScaleStats:
    params = engine.params
    frac = params.frac_bits if engine.mode == "fixed" else None
    acc = StreamAccumulators(params.n_scales, engine.mode, frac)
    for y in engine.rows():
        acc.update_row(engine.raw_rows, engine.igc_row, mask.inside[y])
    return acc.finalize()


def stream_pass1(
    img: GrayImage,
    mask: Mask,
    params: MsldParams,
    arithmetic_mode: ArithmeticMode = "float",
) -> ScaleStats:
    """Single raster sweep accumulating per-scale ROI statistics.

    Raw responses are consumed immediately and never stored; negative
    variances produced by the sum-of-squares formula are clamped to zero
    and counted on the returned stats.
    """
    _validate_mode(arithmetic_mode)
    _check_dims(img.pixels.shape, mask)
    if mask.count == 0:
        raise EmptyRoiError("mask contains no ROI pixels")
    return _run_pass1(_RowEngine(img, params, arithmetic_mode), mask)


def _stats_raws(stats: ScaleStats, frac_bits: int) -> tuple[list[int], list[int], int, int]:
    means = [fx_from_real(m, frac_bits).raw for m in stats.scale_means]
    stds = [fx_from_real(s, frac_bits).raw for s in stats.scale_stds]
    return means, stds, fx_from_real(stats.igc_mean, frac_bits).raw, fx_from_real(stats.igc_std, frac_bits).raw


def _check_combine_range(
    mean_raws: list[int], std_raws: list[int], frac_bits: int, combine_recip: int
):
    zbound = 0
    for m, s in zip(mean_raws, std_raws):
        if s == 0:
            continue
        zbound += (((255 << frac_bits) + abs(m)) << frac_bits) // s + 1
    if 2 * zbound * combine_recip + (1 << frac_bits) >= RAW_LIMIT:
        raise FixedPointOverflowError(
            "standardized responses exceed the vectorized int64 range "
            "(a near-degenerate standard deviation inflates the z values)"
        )


def _run_pass2(engine: _RowEngine, mask: Mask, stats: ScaleStats) -> ResponseMap:
    params = engine.params
    height, ncols = engine.height, engine.ncols
    out = np.zeros((height, ncols), dtype=np.float64)
    n_terms = params.n_scales + 1

    if engine.mode == "fixed":
        f = params.frac_bits
        shift = 1 << f
        mean_raws, std_raws, igc_mean_raw, igc_std_raw = _stats_raws(stats, f)
        combine_recip = fx_reciprocal(n_terms, f).raw
        _check_combine_range(
            mean_raws + [igc_mean_raw], std_raws + [igc_std_raw], f, combine_recip
        )
        zsum = engine.zsum_row
        for y in engine.rows():
            zsum[:] = 0
            for s in range(params.n_scales):
                if std_raws[s] == 0:
                    continue
                num = (engine.raw_rows[s] - mean_raws[s]) << f
                zsum += div_round_half_away_i64(num, std_raws[s])
            if igc_std_raw != 0:
                num = (engine.igc_row - igc_mean_raw) << f
                zsum += div_round_half_away_i64(num, igc_std_raw)
            combined = div_round_half_away_i64(zsum * combine_recip, shift)
            np.divide(combined, shift, out=out[y])
            out[y][~mask.inside[y]] = 0.0
    else:
        combine_recip = 1.0 / n_terms
        zsum = engine.zsum_row
        for y in engine.rows():
            zsum[:] = 0.0
            for s in range(params.n_scales):
                if stats.scale_stds[s] < DEGENERATE_STD:
                    continue
                zsum += (engine.raw_rows[s] - stats.scale_means[s]) / stats.scale_stds[s]
            if stats.igc_std >= DEGENERATE_STD:
                zsum += (engine.igc_row - stats.igc_mean) / stats.igc_std
            np.multiply(zsum, combine_recip, out=out[y])
            out[y][~mask.inside[y]] = 0.0

    return ResponseMap(out)


def _check_pass2_inputs(img: GrayImage, mask: Mask, params: MsldParams,
                        stats: ScaleStats, arithmetic_mode: str):
    _validate_mode(arithmetic_mode)
    _check_dims(img.pixels.shape, mask)
    if stats.n_scales != params.n_scales:
        raise ValueError(
            f"stats carry {stats.n_scales} scales but params require {params.n_scales}"
        )
    expected_frac = params.frac_bits if arithmetic_mode == "fixed" else None
    if stats.frac_bits != expected_frac:
        raise ValueError(
            f"stats were produced with frac_bits={stats.frac_bits}, "
            f"expected {expected_frac} for {arithmetic_mode} mode"
        )
    if stats.roi_count != mask.count:
        raise ValueError(
            f"stats cover {stats.roi_count} ROI pixels but mask has {mask.count}"
        )


def stream_pass2(
    img: GrayImage,
    mask: Mask,
    params: MsldParams,
    stats: ScaleStats,
    arithmetic_mode: ArithmeticMode = "float",
) -> ResponseMap:
    """Second raster sweep: recompute raw responses, standardize, combine.

    Emits each combined response as soon as its raw responses are
    recomputed; per-scale responses exist only as single-row registers.
    """
    _check_pass2_inputs(img, mask, params, stats, arithmetic_mode)
    return _run_pass2(_RowEngine(img, params, arithmetic_mode), mask, stats)


def msld_streaming(
    img: GrayImage,
    mask: Mask,
    params: MsldParams,
    arithmetic_mode: ArithmeticMode = "float",
) -> tuple[ResponseMap, ScaleStats, MemoryFootprint]:
    """Run both passes and report the auxiliary-memory footprint."""
    _validate_mode(arithmetic_mode)
    _check_dims(img.pixels.shape, mask)
    if mask.count == 0:
        raise EmptyRoiError("mask contains no ROI pixels")

    engine1 = _RowEngine(img, params, arithmetic_mode)
    stats = _run_pass1(engine1, mask)
    pass1_allocs = engine1.allocations
    del engine1

    engine2 = _RowEngine(img, params, arithmetic_mode)
    response = _run_pass2(engine2, mask, stats)
    pass2_allocs = engine2.allocations

    word_bytes = 8
    n_scales = params.n_scales
    accumulator_words = 2 * (n_scales + 1) + 1
    stored_stats_values = 2 * n_scales + 2
    bookkeeping = (accumulator_words + stored_stats_values) * word_bytes
    peak_total_bytes = (
        max(sum(a.nbytes for a in pass1_allocs), sum(a.nbytes for a in pass2_allocs))
        + bookkeeping
    )
    footprint = MemoryFootprint(
        line_buffer_slots=(params.window - 1) * img.width + params.window,
        accumulator_words=accumulator_words,
        stored_stats_values=stored_stats_values,
        peak_total_bytes=peak_total_bytes,
        allocations=pass2_allocs,
    )
    return response, stats, footprint

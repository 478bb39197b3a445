"""Command-line interface: segment, eval, compare, bench.

Exit codes: 0 success, 1 validation failure, 2 I/O or format failure,
3 numeric failure (empty ROI, single-class ground truth, fixed-point
range exceeded). Output files are written atomically via a temporary
sibling, so failed runs leave no partial outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .detector import MsldParams
from .fixedpoint import FixedPointOverflowError
from .imageio import (
    GrayImage,
    Mask,
    PnmFormatError,
    RgbImage,
    extract_inverted_green,
    full_mask,
    load_mask,
    load_pnm,
    save_pnm,
)
from .metrics import (
    SingleClassRoiError,
    best_threshold,
    binarize,
    report_at_threshold,
)
from .reference import EmptyRoiError, ResponseMap, msld_reference
from .streaming import msld_streaming, stream_pass1, stream_pass2

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

RESPONSE_MAGIC = "MSLDF"

ENGINES = ("reference", "streaming-float", "streaming-fixed")


def write_response_file(resp: ResponseMap, path):
    """Header line 'MSLDF <width> <height>' then row-major little-endian f32."""
    header = f"{RESPONSE_MAGIC} {resp.width} {resp.height}\n".encode("ascii")
    payload = resp.values.astype("<f4").tobytes()
    _atomic_write_bytes(Path(path), header + payload)


def read_response_file(path) -> ResponseMap:
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise PnmFormatError("response file has no header line")
    parts = data[:newline].split()
    if len(parts) != 3 or parts[0] != RESPONSE_MAGIC.encode("ascii"):
        raise PnmFormatError(f"bad response header {data[:newline]!r}")
    try:
        width, height = int(parts[1]), int(parts[2])
    except ValueError:
        raise PnmFormatError(f"bad response dimensions {data[:newline]!r}") from None
    count = width * height
    payload = data[newline + 1:]
    if len(payload) < 4 * count:
        raise PnmFormatError(
            f"truncated response payload: expected {4 * count} bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4", count=count).astype(np.float64)
    return ResponseMap(values.reshape(height, width))


def _atomic_write_bytes(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str):
    _atomic_write_bytes(path, text.encode("ascii"))


def _load_gray_input(path) -> GrayImage:
    image = load_pnm(path)
    if isinstance(image, RgbImage):
        return extract_inverted_green(image)
    return image


def _load_roi(mask_path, img: GrayImage) -> Mask:
    if mask_path is None:
        return full_mask(img.width, img.height)
    mask = load_mask(mask_path)
    if (mask.height, mask.width) != (img.height, img.width):
        raise ValueError(
            f"mask dimensions {mask.width}x{mask.height} do not match "
            f"image {img.width}x{img.height}"
        )
    return mask


def _params(args) -> MsldParams:
    return MsldParams(window=args.window, frac_bits=args.frac_bits)


def _run_engine(engine: str, img, mask, params):
    """Returns (response, stats_or_None, footprint_or_None)."""
    if engine == "reference":
        resp, stats = msld_reference(img, mask, params)
        return resp, stats, None
    mode = "fixed" if engine == "streaming-fixed" else "float"
    resp, stats, footprint = msld_streaming(img, mask, params, mode)
    return resp, stats, footprint


def _report_lines(pairs) -> str:
    return "".join(f"{key} {value}\n" for key, value in pairs)


def _emit_report(args, lines: str):
    sys.stdout.write(lines)
    if getattr(args, "report", None):
        _atomic_write_text(Path(args.report), lines)


def cmd_segment(args) -> int:
    img = _load_gray_input(args.input)
    mask = _load_roi(args.mask, img)
    params = _params(args)
    start = time.perf_counter()
    resp, stats, footprint = _run_engine(args.engine, img, mask, params)
    elapsed = time.perf_counter() - start
    write_response_file(resp, args.out)

    if args.threshold is not None:
        vessel = binarize(resp, mask, args.threshold)
        seg = GrayImage(np.where(vessel.inside, 255, 0).astype(np.uint8))
        save_pnm(seg, Path(args.out).with_name(Path(args.out).name + ".seg.pgm"))

    pairs = [
        ("engine", args.engine),
        ("window", params.window),
        ("scales", params.n_scales),
        ("roi_count", stats.roi_count),
        ("seconds", f"{elapsed:.3f}"),
        ("negative_variance_clamps", stats.negative_variance_clamps),
    ]
    if footprint is not None:
        pairs += [
            ("line_buffer_slots", footprint.line_buffer_slots),
            ("accumulator_words", footprint.accumulator_words),
            ("stored_stats_values", footprint.stored_stats_values),
            ("peak_total_bytes", footprint.peak_total_bytes),
        ]
    _emit_report(args, _report_lines(pairs))
    return EXIT_OK


def cmd_eval(args) -> int:
    resp = read_response_file(args.input)
    truth = load_mask(args.truth)
    img_dims = (resp.height, resp.width)
    if (truth.height, truth.width) != img_dims:
        raise ValueError(
            f"truth dimensions {truth.width}x{truth.height} do not match "
            f"response {resp.width}x{resp.height}"
        )
    if args.mask is not None:
        roi = load_mask(args.mask)
        if (roi.height, roi.width) != img_dims:
            raise ValueError(
                f"mask dimensions {roi.width}x{roi.height} do not match "
                f"response {resp.width}x{resp.height}"
            )
    else:
        roi = full_mask(resp.width, resp.height)

    if args.threshold is not None:
        report = report_at_threshold(resp, truth, roi, args.threshold)
    else:
        _, report = best_threshold(resp, truth, roi)

    pairs = [
        ("auc", f"{report.auc:.6f}"),
        ("se", f"{report.se:.6f}"),
        ("sp", f"{report.sp:.6f}"),
        ("acc", f"{report.acc:.6f}"),
        ("threshold", repr(report.threshold)),
        ("roi_count", report.roi_count),
    ]
    _emit_report(args, _report_lines(pairs))
    return EXIT_OK


def cmd_compare(args) -> int:
    img = _load_gray_input(args.input)
    mask = _load_roi(args.mask, img)
    params = _params(args)

    ref_resp, ref_stats = msld_reference(img, mask, params)
    inside = mask.inside
    pairs = [("window", params.window), ("frac_bits", params.frac_bits)]
    for mode in ("float", "fixed"):
        resp, stats, _ = msld_streaming(img, mask, params, mode)
        diff = np.abs(resp.values[inside] - ref_resp.values[inside])
        pairs += [
            (f"{mode}_max_abs_diff", repr(float(diff.max()))),
            (f"{mode}_mean_abs_diff", repr(float(diff.mean()))),
            (f"{mode}_negative_variance_clamps", stats.negative_variance_clamps),
        ]
        for s, scale in enumerate(params.scales):
            pairs += [
                (
                    f"{mode}_scale{scale}_mean_delta",
                    repr(stats.scale_means[s] - ref_stats.scale_means[s]),
                ),
                (
                    f"{mode}_scale{scale}_std_delta",
                    repr(stats.scale_stds[s] - ref_stats.scale_stds[s]),
                ),
            ]
        pairs += [
            (f"{mode}_igc_mean_delta", repr(stats.igc_mean - ref_stats.igc_mean)),
            (f"{mode}_igc_std_delta", repr(stats.igc_std - ref_stats.igc_std)),
        ]
    _emit_report(args, _report_lines(pairs))
    return EXIT_OK


def cmd_bench(args) -> int:
    img = _load_gray_input(args.input)
    mask = _load_roi(args.mask, img)
    params = _params(args)
    mode = "fixed" if args.engine == "streaming-fixed" else "float"

    pairs = [("engine", args.engine), ("window", params.window), ("reps", args.reps)]
    footprint = None
    for rep in range(args.reps):
        if args.engine == "reference":
            start = time.perf_counter()
            msld_reference(img, mask, params)
            pairs.append((f"rep{rep}_seconds", f"{time.perf_counter() - start:.3f}"))
        else:
            start = time.perf_counter()
            stats = stream_pass1(img, mask, params, mode)
            mid = time.perf_counter()
            stream_pass2(img, mask, params, stats, mode)
            end = time.perf_counter()
            pairs += [
                (f"rep{rep}_pass1_seconds", f"{mid - start:.3f}"),
                (f"rep{rep}_pass2_seconds", f"{end - mid:.3f}"),
            ]
            if footprint is None:
                _, _, footprint = msld_streaming(img, mask, params, mode)
    if footprint is not None:
        pairs += [
            ("line_buffer_slots", footprint.line_buffer_slots),
            ("accumulator_words", footprint.accumulator_words),
            ("stored_stats_values", footprint.stored_stats_values),
            ("peak_total_bytes", footprint.peak_total_bytes),
        ]
    _emit_report(args, _report_lines(pairs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msld",
        description=(
            "Multi-scale line detector for vessel segmentation. Inputs are "
            "PGM/PPM files with maxval 255 (convert other formats "
            "externally); PPM inputs are reduced to the inverted green "
            "channel, PGM inputs are used as-is."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_out: bool):
        p.add_argument("--input", required=True, help="input image (PGM/PPM)")
        p.add_argument("--mask", help="ROI mask PGM; defaults to the full frame")
        p.add_argument("--window", type=int, default=15, help="odd window size W (default 15)")
        p.add_argument("--frac-bits", type=int, default=18, dest="frac_bits",
                       help="fractional bits for fixed-point mode (default 18)")
        if need_out:
            p.add_argument("--out", required=True, help="output response file")
        p.add_argument("--report", help="also write the report lines to this file")

    p_seg = sub.add_parser("segment", help="compute a combined response map")
    add_common(p_seg, need_out=True)
    p_seg.add_argument("--engine", choices=ENGINES, default="streaming-fixed")
    p_seg.add_argument("--threshold", type=float,
                       help="also write a binarized PGM at <out>.seg.pgm")
    p_seg.set_defaults(func=cmd_segment)

    p_eval = sub.add_parser("eval", help="score a response file against ground truth")
    p_eval.add_argument("--input", required=True, help="response file from segment")
    p_eval.add_argument("--truth", required=True, help="ground-truth vessel PGM")
    p_eval.add_argument("--mask", help="ROI mask PGM; defaults to the full frame")
    p_eval.add_argument("--threshold", type=float,
                        help="fixed threshold; defaults to the accuracy-optimal one")
    p_eval.add_argument("--report", help="also write the report lines to this file")
    p_eval.set_defaults(func=cmd_eval)

    p_cmp = sub.add_parser("compare", help="diff streaming engines against the reference")
    add_common(p_cmp, need_out=False)
    p_cmp.set_defaults(func=cmd_compare)

    p_bench = sub.add_parser("bench", help="wall-clock timings and memory footprint")
    add_common(p_bench, need_out=False)
    p_bench.add_argument("--engine", choices=ENGINES, default="streaming-fixed")
    p_bench.add_argument("--reps", type=int, default=1, help="timing repetitions")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EmptyRoiError, SingleClassRoiError, FixedPointOverflowError, ZeroDivisionError) as exc:
        print(f"msld: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PnmFormatError as exc:
        print(f"msld: format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"msld: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"msld: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

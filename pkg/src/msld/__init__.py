"""Multi-scale line detector for retinal vessel segmentation.

Two interchangeable engines produce the same combined response map: a
whole-image floating-point reference, and a raster-order streaming engine
that keeps only a line buffer plus per-scale statistics and can run its
datapath in configurable fixed-point arithmetic.
"""

from .detector import (
    ORIENTATION_COUNT,
    LinePattern,
    MsldParams,
    RawResponse,
    line_mean,
    line_offsets,
    raw_response,
    window_mean,
)
from .fixedpoint import (
    FixedPoint,
    FixedPointOverflowError,
    fx_add,
    fx_div,
    fx_from_int,
    fx_from_real,
    fx_mul,
    fx_reciprocal,
    fx_sqrt,
    fx_sub,
    fx_to_real,
)
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
    ConfusionCounts,
    MetricsReport,
    SingleClassRoiError,
    auc,
    best_threshold,
    binarize,
    confusion,
    report_at_threshold,
)
from .reference import (
    EmptyRoiError,
    ResponseMap,
    ScaleStats,
    combine,
    msld_reference,
    scale_stats,
    standardize,
)
from .streaming import (
    LineBuffer,
    MemoryFootprint,
    StreamAccumulators,
    line_sums_incremental,
    msld_streaming,
    rrcm_max_subtract,
    stream_pass1,
    stream_pass2,
)

__version__ = "0.1.0"

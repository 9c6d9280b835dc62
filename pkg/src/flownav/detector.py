"""Five-region obstacle detection over semi-dense optical flow.

Two consecutive frames are reduced to a working resolution, densely flowed,
and sampled on a centered lattice. Sample magnitudes are pooled into five
vertical image regions (far-left, near-left, center, near-right, far-right);
the region with the largest pooled magnitude names the obstacle candidate.
A short rolling history plus a magnitude threshold turn that per-frame
argmax into a debounced steering signal: -1 means "obstacle on the left",
+1 "obstacle on the right", 0 "keep going".
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flow import FlowField, FlowParams, estimate_flow
from .flow.imops import gaussian_blur, resize_bilinear, to_unit_gray

REFERENCE_WIDTH = 320
N_REGIONS = 5


@dataclass(frozen=True)
class DetectorConfig:
    """Tuning for the sampling grid, region pooling, and signal debounce.

    ``magnitude_threshold`` is expressed in pixels at a 320-wide working
    image and scales linearly with ``work_width`` (the same scene rendered
    wider moves proportionally more pixels per frame). ``discard_max_mag``
    defaults to the grid step: anything jumping farther than one lattice
    cell between frames is treated as a mismatch. The ROI restricts pooling
    to a centered column band covering ``roi_fraction`` of the width.
    """

    work_width: int = 320
    work_height: int = 240
    grid_step: int = 16
    discard_max_mag: float | None = None
    roi_enabled: bool = False
    roi_fraction: float = 0.25
    stat: str = "median"
    history_len: int = 5
    persistence_min: int = 3
    magnitude_threshold: float = 1.5
    sharpen_enabled: bool = False

    def __post_init__(self) -> None:
        if self.work_width < 1 or self.work_height < 1:
            raise ValueError("work dimensions must be >= 1")
        if self.grid_step < 2:
            raise ValueError("grid_step must be >= 2")
        if not 0.0 < self.roi_fraction <= 1.0:
            raise ValueError("roi_fraction must lie in (0, 1]")
        if self.stat not in ("mean", "median"):
            raise ValueError(f"stat must be 'mean' or 'median', got {self.stat!r}")
        if self.history_len < 1:
            raise ValueError("history_len must be >= 1")
        if not 1 <= self.persistence_min <= self.history_len:
            raise ValueError("persistence_min must lie in [1, history_len]")
        if self.magnitude_threshold <= 0:
            raise ValueError("magnitude_threshold must be > 0")
        if self.discard_max_mag is None:
            object.__setattr__(self, "discard_max_mag", float(self.grid_step))
        elif self.discard_max_mag <= 0:
            raise ValueError("discard_max_mag must be > 0")

    def effective_threshold(self) -> float:
        """Pixel threshold at the configured working width."""
        return self.magnitude_threshold * (self.work_width / REFERENCE_WIDTH)


@dataclass
class SampledFlow:
    """Lattice samples of a flow field: positions, vectors, and keep flags."""

    points: np.ndarray  # (N, 2) int64, columns (x, y)
    vectors: np.ndarray  # (N, 2) float64 displacement at each point
    kept: np.ndarray  # (N,) bool — valid flow and magnitude under the cap


@dataclass
class RegionReport:
    """Pooled magnitudes for the five vertical regions of one frame pair."""

    region_stat: np.ndarray  # (5,) pooled |d| per region, 0 where empty
    region_count: np.ndarray  # (5,) kept points per region
    argmax_region: int
    argmax_unique: bool
    frame_seq: int = 0


@dataclass(frozen=True)
class DetectionSignal:
    """Debounced steering decision: -1 left obstacle, +1 right, 0 clear."""

    value: int
    region: int | None
    stat_at_max: float


class DetectorState:
    """Rolling report history plus the frame counter for one detector."""

    def __init__(self, cfg: DetectorConfig):
        self.history: deque[RegionReport] = deque(maxlen=cfg.history_len)
        self.frame_seq = 0


def preprocess(frame: np.ndarray, cfg: DetectorConfig) -> np.ndarray:
    """Grayscale [0,1] frame at working resolution, optionally sharpened.

    Plain (non-letterboxed) resampling: region geometry is column-based, so
    horizontal coverage matters more than aspect fidelity.
    """
    gray = to_unit_gray(frame)
    if gray.size == 0:
        raise ValueError("empty frame")
    work = resize_bilinear(gray, cfg.work_height, cfg.work_width)
    if cfg.sharpen_enabled:
        # Unsharp mask; of a constant image this is exactly the constant.
        work = np.clip(work + (work - gaussian_blur(work, 1.0)), 0.0, 1.0)
    return work


def make_grid(width: int, height: int, step: int) -> np.ndarray:
    """Centered sample lattice, returned as an (N, 2) array of (x, y).

    Margins center the lattice so it is symmetric about both image axes
    (under the x -> width - x map); a step exceeding a dimension collapses
    that axis to its single center column/row.
    """
    if step < 2:
        raise ValueError("step must be >= 2")

    def axis_positions(size: int) -> np.ndarray:
        count = max(1, size // step)
        margin = (size - step * (count - 1)) // 2
        return margin + step * np.arange(count, dtype=np.int64)

    xs = axis_positions(width)
    ys = axis_positions(height)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def sample_and_discard(
    flow: FlowField, points: np.ndarray, cfg: DetectorConfig
) -> SampledFlow:
    """Read the flow at lattice points; drop invalid or implausible samples.

    A sample survives iff its flow pixel solved validly and its displacement
    magnitude does not exceed ``discard_max_mag`` — larger jumps are treated
    as mismatches rather than motion.
    """
    xs = points[:, 0]
    ys = points[:, 1]
    vectors = flow.d[ys, xs]
    valid = flow.valid[ys, xs]
    mags = np.hypot(vectors[:, 0], vectors[:, 1])
    kept = valid & (mags <= cfg.discard_max_mag)
    return SampledFlow(points=points, vectors=vectors, kept=kept)


def _region_bounds(width: int, cfg: DetectorConfig) -> tuple[float, float]:
    """Column span that the five regions subdivide."""
    if cfg.roi_enabled:
        half = cfg.roi_fraction * width / 2.0
        return width / 2.0 - half, width / 2.0 + half
    return 0.0, float(width)


def assign_regions(xs: np.ndarray, width: int, cfg: DetectorConfig) -> np.ndarray:
    """Region index 0..4 per x, or -1 for points outside the pooled band."""
    lo, hi = _region_bounds(width, cfg)
    span = hi - lo
    pos = (np.asarray(xs, dtype=np.float64) - lo) * N_REGIONS / span
    idx = np.floor(pos).astype(np.int64)
    idx = np.minimum(idx, N_REGIONS - 1)  # x exactly at hi joins the last region
    outside = (xs < lo) | (xs > hi)
    idx[outside] = -1
    return idx


def regionize(
    sampled: SampledFlow, width: int, cfg: DetectorConfig, frame_seq: int = 0
) -> RegionReport:
    """Pool kept-sample magnitudes into the five vertical regions.

    Pooling statistic is the configured median (even counts average the two
    central values) or mean. Empty regions report 0 so a texture-free band
    never claims the maximum. Ties for the maximum go to the smallest index
    and clear ``argmax_unique``.
    """
    if width <= 0:
        raise ValueError("width must be > 0")
    xs = sampled.points[:, 0]
    mags = np.hypot(sampled.vectors[:, 0], sampled.vectors[:, 1])
    regions = assign_regions(xs, width, cfg)

    stat_fn = np.median if cfg.stat == "median" else np.mean
    region_stat = np.zeros(N_REGIONS)
    region_count = np.zeros(N_REGIONS, dtype=np.int64)
    for r in range(N_REGIONS):
        sel = sampled.kept & (regions == r)
        region_count[r] = int(np.count_nonzero(sel))
        if region_count[r] > 0:
            region_stat[r] = float(stat_fn(mags[sel]))

    argmax = int(np.argmax(region_stat))
    unique = int(np.count_nonzero(region_stat == region_stat[argmax])) == 1
    return RegionReport(
        region_stat=region_stat,
        region_count=region_count,
        argmax_region=argmax,
        argmax_unique=unique,
        frame_seq=frame_seq,
    )


def decide(history: Sequence[RegionReport], cfg: DetectorConfig) -> DetectionSignal:
    """Debounce the region history into a steering signal.

    Nonzero only when the history is full, the current argmax region has
    been the argmax in at least ``persistence_min`` of the stored reports,
    its pooled magnitude clears the threshold, and the maximum is unique.
    Left regions (0, 1) map to -1, right regions (3, 4) to +1; the center
    region takes the side whose adjacent region pools more motion, ties
    breaking right.
    """
    current = history[-1]
    region = current.argmax_region
    stat_at_max = float(current.region_stat[region])

    full = len(history) == cfg.history_len
    recurrences = sum(1 for r in history if r.argmax_region == region)
    persistent = recurrences >= cfg.persistence_min
    loud = stat_at_max >= cfg.effective_threshold()
    if not (full and persistent and loud and current.argmax_unique):
        return DetectionSignal(value=0, region=None, stat_at_max=stat_at_max)

    if region <= 1:
        value = -1
    elif region >= 3:
        value = +1
    else:
        value = -1 if current.region_stat[1] > current.region_stat[3] else +1
    return DetectionSignal(value=value, region=region, stat_at_max=stat_at_max)


def detect(
    prev: np.ndarray,
    curr: np.ndarray,
    state: DetectorState,
    cfg: DetectorConfig,
    flow_params: FlowParams | None = None,
) -> tuple[DetectionSignal, RegionReport, FlowField]:
    """Full pipeline for one frame pair; appends to the rolling history."""
    prev_work = preprocess(prev, cfg)
    curr_work = preprocess(curr, cfg)
    flow = estimate_flow(prev_work, curr_work, flow_params)
    grid = make_grid(cfg.work_width, cfg.work_height, cfg.grid_step)
    sampled = sample_and_discard(flow, grid, cfg)
    report = regionize(sampled, cfg.work_width, cfg, frame_seq=state.frame_seq)
    state.history.append(report)
    state.frame_seq += 1
    signal = decide(list(state.history), cfg)
    return signal, report, flow

"""
Augur - Windowing
License: GNU GPL

Cuts a TimeSeries into (possibly overlapping) windows, stacks every window
into one column vector and scales it into the range the sigmoid decoder can
reproduce. Also holds the window size heuristic driven by the distribution of
true segment sizes.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from augur.errors import ConfigError, InputError
from augur.series import true_segment_sizes


def default_stride(window_size):
    """Half-overlapping windows: ceil(N_w / 2), at least 1"""
    return max(1, math.ceil(window_size / 2))


@dataclass(frozen=True)
class WindowConfig:
    window_size: int
    stride: int = None

    def __post_init__(self):
        if int(self.window_size) < 1:
            raise ConfigError(f"Window size must be at least 1, got {self.window_size}")
        object.__setattr__(self, 'window_size', int(self.window_size))
        stride = default_stride(self.window_size) if self.stride is None else int(self.stride)
        if not 1 <= stride <= self.window_size:
            raise ConfigError(
                f"Stride must lie in [1, {self.window_size}], got {stride}"
            )
        object.__setattr__(self, 'stride', stride)

    def window_count(self, length):
        if self.window_size > length:
            raise ConfigError(
                f"Window size {self.window_size} exceeds series length {length}"
            )
        return (length - self.window_size) // self.stride + 1


@dataclass(frozen=True, eq=False)
class ScalingParams:
    """Per-channel minimum and maximum used for min-max scaling"""
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        minimum = np.array(self.minimum, dtype=np.float64)
        maximum = np.array(self.maximum, dtype=np.float64)
        if minimum.shape != maximum.shape or minimum.ndim != 1:
            raise InputError("Scaling minimum and maximum must be vectors of equal length")
        if np.any(minimum > maximum):
            raise InputError("Scaling minimum exceeds maximum")
        minimum.flags.writeable = False
        maximum.flags.writeable = False
        object.__setattr__(self, 'minimum', minimum)
        object.__setattr__(self, 'maximum', maximum)


@dataclass(frozen=True, eq=False)
class WindowedSeries:
    """Stacked window vectors (one per row) and the boundary timestamp between consecutive windows"""
    vectors: np.ndarray
    boundary_timestamps: np.ndarray
    config: WindowConfig
    scaling: ScalingParams

    @property
    def count(self):
        return self.vectors.shape[0]

    @property
    def dimension(self):
        return self.vectors.shape[1]


def fit_scaler(series):
    """Per-channel min and max over all samples"""
    minimum = series.values.min(axis=1)
    maximum = series.values.max(axis=1)
    constant = np.flatnonzero(minimum == maximum)
    if constant.size:
        logging.warning(f"Constant channels {constant.tolist()} will scale to 0.5")
    return ScalingParams(minimum=minimum, maximum=maximum)


def _scale(values, scaling):
    span = scaling.maximum - scaling.minimum
    flat = span == 0
    safe = np.where(flat, 1.0, span)
    scaled = (values - scaling.minimum[:, np.newaxis]) / safe[:, np.newaxis]
    scaled[flat, :] = 0.5
    # rounding can push a value a hair outside the unit interval
    return np.clip(scaled, 0.0, 1.0)


def segment(series, config, scaling):
    """Stack the scaled windows of a series into vectors of dimension Nc * N_w"""
    count = config.window_count(series.length)
    if scaling.minimum.size != series.channels:
        raise InputError(
            f"Scaling fitted on {scaling.minimum.size} channels, series has {series.channels}"
        )
    scaled = _scale(series.values, scaling)
    # (Nc, T - N_w + 1, N_w) -> every stride-th start -> (M, Nc, N_w)
    windows = sliding_window_view(scaled, config.window_size, axis=1)[:, ::config.stride, :]
    windows = windows[:, :count, :].transpose(1, 0, 2)
    vectors = np.ascontiguousarray(windows.reshape(count, series.channels * config.window_size))
    vectors.flags.writeable = False

    boundaries = np.arange(1, count, dtype=np.int64) * config.stride + config.window_size // 2
    boundaries.flags.writeable = False
    logging.info(
        f"Segmented {series.length} samples into {count} windows "
        f"(size {config.window_size}, stride {config.stride}, dimension {vectors.shape[1]})"
    )
    return WindowedSeries(vectors=vectors, boundary_timestamps=boundaries,
                          config=config, scaling=scaling)


def unscale(vectors, scaling, n_channels):
    """Map scaled window vectors back to original units (constant channels return their level)"""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    window_size = vectors.shape[1] // n_channels
    blocks = vectors.reshape(vectors.shape[0], n_channels, window_size)
    span = scaling.maximum - scaling.minimum
    restored = blocks * span[np.newaxis, :, np.newaxis] + scaling.minimum[np.newaxis, :, np.newaxis]
    return restored.reshape(vectors.shape)


def _nearest_rank(sorted_sizes, level):
    # round() strips float noise such as 0.1 * 30 = 3.0000000000000004
    rank = max(1, math.ceil(round(level * len(sorted_sizes), 9)))
    return sorted_sizes[rank - 1]


def suggest_window_size(labels, length, cdf_level=0.1):
    """Window size at the given CDF level of the true segment size distribution"""
    sizes = sorted(true_segment_sizes(labels, length))
    if len(sizes) < 2:
        raise InputError("Window size heuristic needs at least 2 segments (1 breakpoint)")
    size = _nearest_rank(sizes, cdf_level)
    suggested = min(max(size, 2), length)
    logging.info(f"Suggested window size {suggested} from {len(sizes)} segments")
    return int(suggested)

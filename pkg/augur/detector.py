"""
Augur - Breakpoint Detector
License: GNU GPL

Turns top-layer autoencoder features into the normalized consecutive-window
distance curve, picks its local maxima as breakpoints and runs the whole
pipeline: scale, window, train, measure, pick.
"""

import bisect
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks as _scipy_find_peaks

from augur.autoencoder import AutoencoderStack, StackConfig, encode_stack, train_stack
from augur.errors import ConfigError, InputError
from augur.series import DetectionResult, config_digest
from augur.windowing import WindowedSeries, fit_scaler, segment


@dataclass(frozen=True, eq=False)
class DistanceCurve:
    """Dist_t for every consecutive window pair, aligned to boundary timestamps"""
    values: np.ndarray
    boundary_timestamps: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        timestamps = np.array(self.boundary_timestamps, dtype=np.int64).reshape(-1)
        if values.shape != timestamps.shape:
            raise InputError(
                f"Curve has {values.size} values but {timestamps.size} timestamps"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InputError("Distance curve values must be finite and non-negative")
        values.flags.writeable = False
        timestamps.flags.writeable = False
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'boundary_timestamps', timestamps)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class PeakConfig:
    min_prominence: float = 0.05
    min_separation: int = 1
    smoothing: int = 1

    def __post_init__(self):
        if not 0 <= self.min_prominence <= 1:
            raise ConfigError(f"Minimum prominence must lie in [0, 1], got {self.min_prominence}")
        if int(self.min_separation) < 0:
            raise ConfigError(f"Minimum separation must be non-negative, got {self.min_separation}")
        if int(self.smoothing) < 1 or int(self.smoothing) % 2 == 0:
            raise ConfigError(f"Smoothing width must be a positive odd count, got {self.smoothing}")
        object.__setattr__(self, 'min_separation', int(self.min_separation))
        object.__setattr__(self, 'smoothing', int(self.smoothing))


class DetectionRun(NamedTuple):
    result: DetectionResult
    stack: AutoencoderStack
    windows: WindowedSeries
    curve: DistanceCurve


def feature_distance(f_t, f_prev):
    """||f_t - f_prev|| / sqrt(||f_t|| * ||f_prev||)"""
    f_t = np.asarray(f_t, dtype=np.float64)
    f_prev = np.asarray(f_prev, dtype=np.float64)
    if f_t.shape != f_prev.shape:
        raise InputError(f"Feature vectors differ in shape: {f_t.shape} vs {f_prev.shape}")
    norm_t = np.linalg.norm(f_t)
    norm_prev = np.linalg.norm(f_prev)
    if norm_t == 0 or norm_prev == 0:
        raise InputError("Feature distance is undefined for a zero-norm feature vector")
    return float(np.linalg.norm(f_t - f_prev) / np.sqrt(norm_t * norm_prev))


def distance_curve(stack, windows):
    """Distance between the features of every pair of consecutive windows"""
    if stack.input_dim != windows.dimension:
        raise InputError(
            f"Stack expects {stack.input_dim}-dimensional windows, got {windows.dimension}"
        )
    features = encode_stack(stack, windows.vectors)
    norms = np.linalg.norm(features, axis=1)
    if np.any(norms == 0):
        raise InputError("Feature distance is undefined for a zero-norm feature vector")
    numerators = np.linalg.norm(features[1:] - features[:-1], axis=1)
    values = numerators / np.sqrt(norms[1:] * norms[:-1])
    return DistanceCurve(values=values, boundary_timestamps=windows.boundary_timestamps)


def smooth_curve(curve, width):
    """Centered moving average of odd width; width 1 returns the curve unchanged"""
    if width < 1 or width % 2 == 0:
        raise ConfigError(f"Smoothing width must be a positive odd count, got {width}")
    if width == 1 or len(curve) == 0:
        return curve
    values = uniform_filter1d(curve.values, size=width, mode='nearest')
    return DistanceCurve(values=np.maximum(values, 0.0),
                         boundary_timestamps=curve.boundary_timestamps)


def find_peaks(curve, cfg=None):
    """Curve indices of local maxima, filtered by relative prominence and separation"""
    cfg = cfg or PeakConfig()
    values = curve.values
    if values.size < 3:
        return []
    prominence = None
    if cfg.min_prominence > 0 and values.max() > 0:
        prominence = cfg.min_prominence * values.max()
    # scipy excludes endpoints and resolves plateaus to their center, rounding down
    peaks, _ = _scipy_find_peaks(values, prominence=prominence)
    return _separate([int(index) for index in peaks], values, cfg.min_separation)


def _separate(peaks, values, min_separation):
    """Greedy suppression: the higher peak wins, ties go to the earlier index"""
    if min_separation <= 1 or len(peaks) < 2:
        return peaks
    kept = []
    for index in sorted(peaks, key=lambda i: (-values[i], i)):
        position = bisect.bisect_left(kept, index)
        if position > 0 and index - kept[position - 1] < min_separation:
            continue
        if position < len(kept) and kept[position] - index < min_separation:
            continue
        kept.insert(position, index)
    return kept


def detector_settings(window_cfg, stack_cfg, peak_cfg):
    return {
        'method': 'autoencoder',
        'window': asdict(window_cfg),
        'autoencoder': asdict(stack_cfg),
        'peaks': asdict(peak_cfg),
    }


def run_detection(series, window_cfg, stack_cfg=None, peak_cfg=None):
    """Full pipeline returning the detection together with the trained stack and curve"""
    stack_cfg = stack_cfg or StackConfig()
    peak_cfg = peak_cfg or PeakConfig()
    scaling = fit_scaler(series)
    windows = segment(series, window_cfg, scaling)
    if windows.count < 2:
        logging.warning("Fewer than two windows: the distance curve will be empty")
    stack = train_stack(windows.vectors, stack_cfg)
    curve = smooth_curve(distance_curve(stack, windows), peak_cfg.smoothing)
    peaks = find_peaks(curve, peak_cfg)
    breakpoints = [int(curve.boundary_timestamps[index]) for index in peaks]

    digest = config_digest(detector_settings(window_cfg, stack_cfg, peak_cfg))
    result = DetectionResult(breakpoints=breakpoints, curve=curve,
                             detector_id=f"autoencoder:{digest[:12]}")
    logging.info(f"Autoencoder detector found {len(breakpoints)} breakpoints")
    return DetectionRun(result=result, stack=stack, windows=windows, curve=curve)


def detect(series, window_cfg, stack_cfg=None, peak_cfg=None):
    """Detect breakpoints with the stacked autoencoder pipeline"""
    return run_detection(series, window_cfg, stack_cfg, peak_cfg).result


def detection_to_dict(result):
    curve = None
    if result.curve is not None:
        curve = {
            'timestamps': result.curve.boundary_timestamps.tolist(),
            'values': result.curve.values.tolist(),
        }
    return {
        'detector_id': result.detector_id,
        'breakpoints': list(result.breakpoints),
        'curve': curve,
    }


def save_detection(result, path):
    path = Path(path)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(detection_to_dict(result), f, indent=2)
        f.write('\n')
    logging.info(f"Detection saved to {path}")
    return path


def load_detection(path):
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except FileNotFoundError:
        raise InputError(f"Detection file {path} not found")
    except json.JSONDecodeError as e:
        raise InputError(f"Cannot parse detection file {path}: {e}")
    try:
        curve = None
        if document.get('curve'):
            curve = DistanceCurve(values=document['curve']['values'],
                                  boundary_timestamps=document['curve']['timestamps'])
        return DetectionResult(breakpoints=document['breakpoints'], curve=curve,
                               detector_id=document.get('detector_id', path.stem))
    except KeyError as e:
        raise InputError(f"Detection file {path} is missing field {e}")


def write_curve_csv(curve, path):
    """Two-column timestamp,distance file for plotting"""
    frame = pd.DataFrame({'timestamp': curve.boundary_timestamps, 'distance': curve.values})
    frame.to_csv(path, index=False, lineterminator='\n')
    return Path(path)

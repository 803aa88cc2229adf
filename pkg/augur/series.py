"""
Augur - Series Core
License: GNU GPL

Canonical time series and label representations plus the CSV and label file
formats every other module reads and writes.

Timestamps are 0-based sample indices. A breakpoint at index b marks the
boundary between sample b-1 and sample b, so valid breakpoints lie in (0, T).
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from augur.errors import InputError

LAYOUTS = ('columns', 'rows')


def _frozen_array(values):
    array = np.array(values, dtype=np.float64, copy=True, order='C')
    array.flags.writeable = False
    return array


def _check_increasing(breakpoints, what):
    previous = 0
    for index in breakpoints:
        if index <= previous:
            raise InputError(
                f"{what} must be strictly increasing positive indices, got {list(breakpoints)}"
            )
        previous = index


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Nc x T data matrix, row i is channel i, column j is timestamp j"""
    values: np.ndarray
    channel_names: tuple = None
    origin: str = 'synthetic'

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.ndim == 1:
            values = _frozen_array(values[np.newaxis, :])
        if values.ndim != 2:
            raise InputError(f"Series values must be a 2-D matrix, got {values.ndim} dimensions")
        channels, length = values.shape
        if channels < 1 or length < 2:
            raise InputError(f"Series needs at least 1 channel and 2 samples, got {channels}x{length}")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            channel, timestamp = bad[0]
            raise InputError(f"Non-finite value at channel {channel}, timestamp {timestamp}")
        object.__setattr__(self, 'values', values)
        if self.channel_names is not None:
            names = tuple(str(name) for name in self.channel_names)
            if len(names) != channels:
                raise InputError(f"Expected {channels} channel names, got {len(names)}")
            object.__setattr__(self, 'channel_names', names)

    @property
    def channels(self):
        return self.values.shape[0]

    @property
    def length(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelSet:
    """Ground-truth breakpoints with optional per-segment labels"""
    breakpoints: tuple = ()
    segment_labels: tuple = None

    def __post_init__(self):
        breakpoints = tuple(int(index) for index in self.breakpoints)
        _check_increasing(breakpoints, 'Breakpoints')
        object.__setattr__(self, 'breakpoints', breakpoints)
        if self.segment_labels is not None:
            labels = tuple(str(label) for label in self.segment_labels)
            if len(labels) != len(breakpoints) + 1:
                raise InputError(
                    f"Expected {len(breakpoints) + 1} segment labels, got {len(labels)}"
                )
            object.__setattr__(self, 'segment_labels', labels)

    def check_length(self, length):
        """Raise unless every breakpoint lies strictly inside (0, length)"""
        if self.breakpoints and self.breakpoints[-1] >= length:
            raise InputError(
                f"Breakpoint {self.breakpoints[-1]} is out of range for a series of length {length}"
            )
        return self


@dataclass(frozen=True)
class DetectionResult:
    """Detected breakpoints (the alarm set) and the detector that produced them"""
    breakpoints: tuple = ()
    curve: object = None
    detector_id: str = ''

    def __post_init__(self):
        breakpoints = tuple(int(index) for index in self.breakpoints)
        _check_increasing(breakpoints, 'Detected breakpoints')
        object.__setattr__(self, 'breakpoints', breakpoints)

    def check_length(self, length):
        if self.breakpoints and self.breakpoints[-1] >= length:
            raise InputError(
                f"Detection {self.detector_id} has breakpoint {self.breakpoints[-1]} "
                f"beyond series length {length}"
            )
        return self


def load_csv(path, layout='columns', header=False):
    """Load a numeric CSV file into a validated TimeSeries"""
    if layout not in LAYOUTS:
        raise InputError(f"Unknown layout {layout!r}, expected one of {LAYOUTS}")
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Series file {path} not found")

    try:
        frame = pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            encoding='utf-8',
        )
    except pd.errors.EmptyDataError:
        raise InputError(f"Series file {path} is empty")
    except pd.errors.ParserError as e:
        raise InputError(f"Cannot parse series file {path}: {e}")

    if frame.empty:
        raise InputError(f"Series file {path} has no data rows")

    first_line = 2 if header else 1
    cells = frame.to_numpy()
    try:
        # numpy parses each cell with the exact float() conversion
        data = cells.astype(np.float64)
    except ValueError:
        data = frame.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=np.float64)
        if np.isfinite(data).all():
            raise InputError(f"Cannot parse series file {path} as numbers")

    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, column = bad[0]
        raise InputError(
            f"Cannot use {cells[row, column]!r} as a finite number at line {row + first_line}, "
            f"column {column + 1} of {path}"
        )

    names = None
    if layout == 'columns':
        values = data.T
        if header:
            names = [str(name) for name in frame.columns]
    else:
        values = data

    series = TimeSeries(values=values, channel_names=names, origin=str(path))
    logging.info(f"Loaded {path}: {series.channels} channels x {series.length} samples")
    return series


def write_csv(series, path, layout='columns', header=True):
    """Write a TimeSeries so that load_csv with the same layout reads it back exactly"""
    if layout not in LAYOUTS:
        raise InputError(f"Unknown layout {layout!r}, expected one of {LAYOUTS}")
    names = series.channel_names or [f"ch{i}" for i in range(series.channels)]
    if layout == 'columns':
        frame = pd.DataFrame(series.values.T, columns=list(names))
        frame.to_csv(path, index=False, header=header, lineterminator='\n')
    else:
        frame = pd.DataFrame(series.values)
        frame.to_csv(path, index=False, header=header, lineterminator='\n')
    return Path(path)


def load_labels(path, length):
    """Load a label file: one breakpoint index per line, optional ',label' suffix"""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Label file {path} not found")

    found = {}
    with open(path, 'r', encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith('#'):
                continue
            token, _, label = line.partition(',')
            try:
                index = int(token.strip())
            except ValueError:
                raise InputError(f"Non-integer breakpoint {token.strip()!r} at line {number} of {path}")
            if index <= 0 or index >= length:
                raise InputError(
                    f"Breakpoint {index} at line {number} of {path} is out of range (0, {length})"
                )
            if index in found:
                logging.warning(f"Duplicate breakpoint {index} at line {number} of {path} ignored")
                continue
            found[index] = label.strip() if label else None

    breakpoints = sorted(found)
    segment_labels = None
    if any(found[index] is not None for index in breakpoints):
        # A label names the segment that starts at its breakpoint
        segment_labels = [''] + [found[index] or '' for index in breakpoints]
    return LabelSet(breakpoints=breakpoints, segment_labels=segment_labels)


def write_labels(labels, path):
    """Write a LabelSet in the format load_labels reads"""
    lines = []
    for position, index in enumerate(labels.breakpoints):
        if labels.segment_labels is not None and labels.segment_labels[position + 1]:
            lines.append(f"{index},{labels.segment_labels[position + 1]}\n")
        else:
            lines.append(f"{index}\n")
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.writelines(lines)
    return Path(path)


def true_segment_sizes(labels, length):
    """Segment sizes implied by the breakpoints with 0 and T as sentinels"""
    labels.check_length(length)
    edges = np.array([0, *labels.breakpoints, length], dtype=np.int64)
    return [int(size) for size in np.diff(edges)]


def segment_size_cdf(labels, length):
    """Sorted true segment sizes and their empirical cumulative distribution"""
    sizes = np.sort(np.array(true_segment_sizes(labels, length)))
    cdf = np.arange(1, sizes.size + 1) / sizes.size
    return sizes, cdf


def config_digest(settings):
    """sha256 of the canonical JSON form of a configuration mapping"""
    canonical = json.dumps(settings, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

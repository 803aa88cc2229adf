"""
Augur - Synthetic Data Generator
License: GNU GPL

Seeded piecewise-stationary benchmarks with known breakpoints:

- exponential_segments: every segment is i.i.d. Exponential(rate), with the
  rate drawn uniformly from (low, high).
- step_mean: every segment has a constant mean drawn uniformly from
  (low, high) plus Gaussian noise; consecutive means can be forced apart by
  min_jump.

Randomness comes from PCG64 generators seeded through SeedSequence(seed)
spawned into three streams (positions, parameters, samples). Only uniform
doubles are consumed: exponential variates by inversion, Gaussian variates
by Box-Muller.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from augur.errors import ConfigError
from augur.series import LabelSet, TimeSeries, write_csv, write_labels

KINDS = ('exponential_segments', 'step_mean')
MAX_JUMP_ATTEMPTS = 10000


@dataclass(frozen=True)
class SynthConfig:
    T: int = 2000
    k: int = 4
    seed: int = 0
    kind: str = 'step_mean'
    low: float = 0.5
    high: float = 5.0
    noise_sigma: float = 1.0
    min_jump: float = 0.0
    channels: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"Unknown synthetic kind {self.kind!r}, expected one of {KINDS}")
        if int(self.T) < 2:
            raise ConfigError(f"Series length must be at least 2, got {self.T}")
        if not 0 <= int(self.k) < int(self.T):
            raise ConfigError(f"Changepoint count must lie in [0, T), got {self.k}")
        if not 0 < self.low < self.high:
            raise ConfigError(f"Parameter range needs 0 < low < high, got ({self.low}, {self.high})")
        if not self.noise_sigma >= 0:
            raise ConfigError(f"Noise sigma must be non-negative, got {self.noise_sigma}")
        if not self.min_jump >= 0:
            raise ConfigError(f"Minimum jump must be non-negative, got {self.min_jump}")
        if self.min_jump >= self.high - self.low:
            raise ConfigError(
                f"Minimum jump {self.min_jump} cannot be met inside ({self.low}, {self.high})"
            )
        if int(self.channels) < 1:
            raise ConfigError(f"Channel count must be at least 1, got {self.channels}")
        if int(self.seed) < 0:
            raise ConfigError(f"Seed must be a non-negative integer, got {self.seed}")
        for name in ('T', 'k', 'seed', 'channels'):
            object.__setattr__(self, name, int(getattr(self, name)))


class SyntheticData(NamedTuple):
    series: TimeSeries
    labels: LabelSet
    parameters: np.ndarray  # channels x segments: rates or means


def min_segment_length(length, k):
    if k == 0:
        return length
    return max(2, length // (10 * k))


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(3)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def _draw_positions(rng, length, k):
    if k == 0:
        return []
    m = min_segment_length(length, k)
    slack = length - (k + 1) * m
    if slack < 0:
        raise ConfigError(
            f"{k} changepoints with minimum segment length {m} do not fit in {length} samples"
        )
    offsets = np.sort(np.floor(rng.random(k) * (slack + 1)).astype(np.int64))
    return [int(offset + (i + 1) * m) for i, offset in enumerate(offsets)]


def _draw_parameters(rng, cfg, segments):
    span = cfg.high - cfg.low
    values = []
    for _ in range(segments):
        value = cfg.low + span * rng.random()
        if cfg.kind == 'step_mean' and values and cfg.min_jump > 0:
            attempts = 1
            while abs(value - values[-1]) < cfg.min_jump:
                if attempts >= MAX_JUMP_ATTEMPTS:
                    raise ConfigError(f"Could not draw a mean at least {cfg.min_jump} from the previous one")
                value = cfg.low + span * rng.random()
                attempts += 1
        values.append(value)
    return values


def _exponential(rng, rate, size):
    return -np.log1p(-rng.random(size)) / rate


def _gaussian(rng, size):
    pairs = (size + 1) // 2
    radius = np.sqrt(-2.0 * np.log1p(-rng.random(pairs)))
    angle = 2.0 * math.pi * rng.random(pairs)
    return np.concatenate((radius * np.cos(angle), radius * np.sin(angle)))[:size]


def synthesize(cfg):
    """Generate a series, its labels and the per-segment parameters"""
    position_rng, parameter_rng, sample_rng = _streams(cfg.seed)
    positions = _draw_positions(position_rng, cfg.T, cfg.k)
    edges = [0, *positions, cfg.T]
    segments = len(edges) - 1

    values = np.empty((cfg.channels, cfg.T))
    parameters = np.empty((cfg.channels, segments))
    for channel in range(cfg.channels):
        parameters[channel] = _draw_parameters(parameter_rng, cfg, segments)
        for i in range(segments):
            start, end = edges[i], edges[i + 1]
            if cfg.kind == 'exponential_segments':
                values[channel, start:end] = _exponential(sample_rng, parameters[channel, i], end - start)
            else:
                noise = _gaussian(sample_rng, end - start) * cfg.noise_sigma
                values[channel, start:end] = parameters[channel, i] + noise

    series = TimeSeries(values=values, origin='synthetic')
    labels = LabelSet(breakpoints=positions)
    logging.info(
        f"Generated {cfg.kind} series: {cfg.channels} channels x {cfg.T} samples, "
        f"{cfg.k} breakpoints (seed {cfg.seed})"
    )
    return SyntheticData(series=series, labels=labels, parameters=parameters)


def generate(cfg):
    """(TimeSeries, LabelSet) for a synthetic configuration"""
    data = synthesize(cfg)
    return data.series, data.labels


def write(series, labels, out_dir, stem='synth'):
    """Write the series CSV (channels as columns, no header) and the label file"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series_path = write_csv(series, out_dir / f"{stem}.csv", layout='columns', header=False)
    labels_path = write_labels(labels, out_dir / f"{stem}_labels.txt")
    return series_path, labels_path

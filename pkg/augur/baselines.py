"""
Augur - Baseline Detectors
License: GNU GPL

Reference changepoint detectors used for head-to-head comparison:

- PELT (pruned exact linear time) penalized segmentation with four cost
  models: normal mean shift, normal mean and variance shift, exponential
  and Poisson.
- Bayesian online changepoint detection with a constant hazard and either
  a Gamma prior on the precision (known zero mean) or a Gaussian prior on
  the mean (known observation variance).

Both are univariate: multichannel series are reduced to the per-timestamp
L2 norm across channels first. Both emit a DetectionResult without a curve.
"""

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import logsumexp, xlogy

from augur.errors import ConfigError, InputError
from augur.series import DetectionResult, config_digest

PELT_COSTS = ('normal_mean', 'normal_mean_variance', 'exponential', 'poisson')
# free parameters per segment, used by the bic penalty
COST_PARAMETERS = {
    'normal_mean': 1,
    'normal_mean_variance': 2,
    'exponential': 1,
    'poisson': 1,
}
BOCPD_MODELS = ('gamma_precision', 'gaussian')
VARIANCE_FLOOR = 1e-300


@dataclass(frozen=True)
class PeltConfig:
    cost: str = 'normal_mean'
    penalty: object = 'bic'
    min_segment: int = 2

    def __post_init__(self):
        if self.cost not in PELT_COSTS:
            raise ConfigError(f"Unknown PELT cost {self.cost!r}, expected one of {PELT_COSTS}")
        if self.penalty != 'bic':
            try:
                penalty = float(self.penalty)
            except (TypeError, ValueError):
                raise ConfigError(f"PELT penalty must be a positive number or 'bic', got {self.penalty!r}")
            if not penalty > 0:
                raise ConfigError(f"PELT penalty must be positive, got {penalty}")
            object.__setattr__(self, 'penalty', penalty)
        if int(self.min_segment) < 1:
            raise ConfigError(f"Minimum segment length must be at least 1, got {self.min_segment}")
        if self.cost == 'normal_mean_variance' and int(self.min_segment) < 2:
            raise ConfigError("The mean-variance cost needs segments of at least 2 samples")
        object.__setattr__(self, 'min_segment', int(self.min_segment))

    def resolve_penalty(self, length):
        if self.penalty == 'bic':
            return COST_PARAMETERS[self.cost] * math.log(length)
        return self.penalty


@dataclass(frozen=True)
class BocpdConfig:
    model: str = 'gaussian'
    a: float = 1.0
    b: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    obs_sigma: float = 1.0
    hazard_rate: float = 250.0
    max_run_length: int = None
    threshold: float = 0.5

    def __post_init__(self):
        if self.model not in BOCPD_MODELS:
            raise ConfigError(f"Unknown BOCPD model {self.model!r}, expected one of {BOCPD_MODELS}")
        for name in ('a', 'b', 'sigma', 'obs_sigma', 'hazard_rate'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"BOCPD parameter {name} must be positive, got {getattr(self, name)}")
        if self.hazard_rate < 1:
            raise ConfigError(f"Expected run length must be at least 1, got {self.hazard_rate}")
        if self.max_run_length is not None and int(self.max_run_length) < 1:
            raise ConfigError(f"Maximum run length must be at least 1, got {self.max_run_length}")
        if not 0 < self.threshold < 1:
            raise ConfigError(f"Changepoint threshold must lie in (0, 1), got {self.threshold}")


PRESETS = {
    'PE': ('pelt', PeltConfig(cost='exponential')),
    'PM': ('pelt', PeltConfig(cost='normal_mean')),
    'PV': ('pelt', PeltConfig(cost='normal_mean_variance')),
    'PP': ('pelt', PeltConfig(cost='poisson')),
    'BG1': ('bocpd', BocpdConfig(model='gamma_precision', a=1.0, b=1.0, hazard_rate=1000.0)),
    'BG2': ('bocpd', BocpdConfig(model='gaussian', mu=1.15e5, sigma=1e4, hazard_rate=250.0)),
}


def preset(name):
    """(method, config) of one of the named comparison variants"""
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"Unknown baseline variant {name!r}, expected one of {sorted(PRESETS)}")


def reduce_channels(series):
    """Univariate view of a series: the channel itself or the L2 norm across channels"""
    if series.channels == 1:
        return np.array(series.values[0], dtype=np.float64)
    return np.linalg.norm(series.values, axis=0)


class CostStatistics(NamedTuple):
    sums: np.ndarray
    squares: np.ndarray


def cost_statistics(x):
    x = np.asarray(x, dtype=np.float64)
    return CostStatistics(
        sums=np.concatenate(([0.0], np.cumsum(x))),
        squares=np.concatenate(([0.0], np.cumsum(x * x))),
    )


def segment_cost(kind, statistics, starts, end):
    """Twice the negative log-likelihood of x[s:end] for every start s, up to data constants"""
    starts = np.asarray(starts, dtype=np.int64)
    n = (end - starts).astype(np.float64)
    total = statistics.sums[end] - statistics.sums[starts]
    if kind == 'normal_mean':
        return statistics.squares[end] - statistics.squares[starts] - total * total / n
    if kind == 'normal_mean_variance':
        mean = total / n
        variance = (statistics.squares[end] - statistics.squares[starts]) / n - mean * mean
        variance = np.maximum(variance, VARIANCE_FLOOR)
        return n * (np.log(2.0 * np.pi * variance) + 1.0)
    if kind == 'exponential':
        return 2.0 * n * (np.log(total / n) + 1.0)
    if kind == 'poisson':
        mean = total / n
        return 2.0 * n * mean - 2.0 * xlogy(total, mean)
    raise ConfigError(f"Unknown PELT cost {kind!r}, expected one of {PELT_COSTS}")


def _check_domain(x, cost):
    if cost == 'exponential' and np.any(x <= 0):
        raise InputError("The exponential cost needs strictly positive data")
    if cost == 'poisson' and (np.any(x < 0) or np.any(x != np.round(x))):
        raise InputError("The Poisson cost needs non-negative integer data")


def _backtrack(last, length):
    changepoints = []
    t = length
    while t > 0:
        s = int(last[t])
        if s > 0:
            changepoints.append(s)
        t = s
    return changepoints[::-1]


def pelt_changepoints(x, cfg):
    """Exact minimizer of total segment cost plus penalty per changepoint"""
    x = np.asarray(x, dtype=np.float64)
    _check_domain(x, cfg.cost)
    length = x.size
    beta = cfg.resolve_penalty(length)
    m = cfg.min_segment
    if length < m:
        return []
    statistics = cost_statistics(x)

    F = np.full(length + 1, np.inf)
    F[0] = -beta
    last = np.zeros(length + 1, dtype=np.int64)
    candidates = [0]
    pending = {}
    for t in range(m, length + 1):
        # a start ruled out at time u stays out only from u + m onward
        dropped = pending.pop(t, None)
        if dropped:
            candidates = [s for s in candidates if s not in dropped]
        if t - m >= m:
            candidates.append(t - m)
        starts = np.array(candidates, dtype=np.int64)
        partial = F[starts] + segment_cost(cfg.cost, statistics, starts, t)
        values = partial + beta
        best = int(np.argmin(values))
        F[t] = values[best]
        last[t] = starts[best]
        pruned = starts[partial > F[t]]
        if pruned.size:
            pending[t + m] = set(pruned.tolist())
    return _backtrack(last, length)


def pelt_segment(series, cfg):
    """PELT on a single-channel view of the series"""
    x = reduce_channels(series)
    changepoints = pelt_changepoints(x, cfg)
    digest = config_digest({'method': 'pelt', **asdict(cfg)})
    logging.info(f"PELT ({cfg.cost}) found {len(changepoints)} changepoints")
    return DetectionResult(breakpoints=changepoints, curve=None,
                           detector_id=f"pelt-{cfg.cost}:{digest[:12]}")


class BocpdRun(NamedTuple):
    posterior: np.ndarray  # None unless requested
    result: DetectionResult
    changepoint_probability: np.ndarray  # P(r_t = 0) per timestamp
    map_run_length: np.ndarray


def _standardize(x):
    centered = x - x.mean()
    scale = centered.std()
    return centered / scale if scale > 0 else centered


def _log_predictive(cfg, value, count, total, squares):
    """Log predictive density of value under each run's posterior (count may be 0 for the prior)"""
    if cfg.model == 'gaussian':
        precision = 1.0 / cfg.sigma ** 2 + count / cfg.obs_sigma ** 2
        mean = (cfg.mu / cfg.sigma ** 2 + total / cfg.obs_sigma ** 2) / precision
        scale = np.sqrt(1.0 / precision + cfg.obs_sigma ** 2)
        return stats.norm.logpdf(value, loc=mean, scale=scale)
    shape = cfg.a + count / 2.0
    rate = cfg.b + squares / 2.0
    return stats.t.logpdf(value, df=2.0 * shape, loc=0.0, scale=np.sqrt(rate / shape))


def bocpd_run(series, cfg, keep_posterior=False):
    """Changepoints implied by the run-length posterior

    Each step keeps P(r_t = 0) and the most probable run length. The dense
    posterior (rows: run length, columns: time) is stored only with keep_posterior.
    """
    x = reduce_channels(series)
    if cfg.model == 'gamma_precision':
        x = _standardize(x)
    length = x.size
    max_run = length - 1 if cfg.max_run_length is None else min(int(cfg.max_run_length), length - 1)
    hazard = 1.0 / cfg.hazard_rate
    log_hazard = math.log(hazard)
    log_survive = math.log1p(-hazard) if hazard < 1 else -np.inf

    posterior = None
    if keep_posterior:
        posterior = np.zeros((max_run + 1, length))
        posterior[0, 0] = 1.0
    reset = np.zeros(length)
    reset[0] = 1.0
    map_run = np.zeros(length, dtype=np.int64)
    log_message = np.zeros(1)
    counts = np.ones(1)
    totals = np.array([x[0]])
    squares = np.array([x[0] * x[0]])

    for t in range(1, length):
        value = x[t]
        growth = log_message + _log_predictive(cfg, value, counts, totals, squares) + log_survive
        prior = _log_predictive(cfg, value, 0.0, 0.0, 0.0)
        fresh = logsumexp(log_message) + log_hazard + prior
        joint = np.concatenate(([fresh], growth))
        counts = np.concatenate(([1.0], counts + 1.0))
        totals = np.concatenate(([value], totals + value))
        squares = np.concatenate(([value * value], squares + value * value))
        if joint.size > max_run + 1:
            # truncate the longest runs; their mass is dropped before renormalizing
            joint = joint[:max_run + 1]
            counts, totals, squares = counts[:max_run + 1], totals[:max_run + 1], squares[:max_run + 1]
        log_message = joint - logsumexp(joint)
        column = np.exp(log_message)
        reset[t] = column[0]
        map_run[t] = np.argmax(column)
        if keep_posterior:
            posterior[:column.size, t] = column

    changepoints = [int(t) for t in np.flatnonzero(reset[1:] > cfg.threshold) + 1]
    digest = config_digest({'method': 'bocpd', **asdict(cfg)})
    logging.info(f"BOCPD ({cfg.model}) found {len(changepoints)} changepoints")
    result = DetectionResult(breakpoints=changepoints, curve=None,
                             detector_id=f"bocpd-{cfg.model}:{digest[:12]}")
    return BocpdRun(posterior=posterior, result=result, changepoint_probability=reset, map_run_length=map_run)


def map_run_lengths(posterior):
    """Most probable run length at every time step"""
    return np.argmax(posterior, axis=0)


def write_posterior_csv(posterior, path):
    """Run-length posterior with one row per run length and one column per timestamp"""
    frame = pd.DataFrame(posterior, columns=[f"t{t}" for t in range(posterior.shape[1])])
    frame.index.name = 'run_length'
    frame.to_csv(path, lineterminator='\n')
    return Path(path)

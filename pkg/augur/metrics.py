"""
Augur - Evaluation Metrics
License: GNU GPL

Toleration-distance matching of detected against true breakpoints, true and
false positive rates with the ROC sweep over the toleration distance, and
the count based scores: prediction ratio, nearest-breakpoint MSE and
prediction loss.

Matching rule: a detected breakpoint a is correct when its nearest true
breakpoint b has a as its own nearest detection and |a - b| < tau.
Equidistant candidates resolve to the smaller index in both directions.
"""

import bisect
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from augur.errors import ConfigError, InputError, MetricUndefinedError

# prediction loss is reported as undefined (None) and written as this token
UNDEFINED_TOKEN = 'undef'
INFINITY_TOKEN = 'inf'


@dataclass(frozen=True)
class MatchConfig:
    tolerance: float = 1
    pr_cap: float = 100.0
    mse_unit: float = 1.0

    def __post_init__(self):
        if not self.tolerance >= 0:
            raise ConfigError(f"Toleration distance must be non-negative, got {self.tolerance}")
        if not self.pr_cap > 0:
            raise ConfigError(f"Prediction ratio cap must be positive, got {self.pr_cap}")
        if not self.mse_unit > 0:
            raise ConfigError(f"MSE unit must be positive, got {self.mse_unit}")


@dataclass(frozen=True)
class ConfusionCounts:
    correct: int
    ground_truth: int
    alarms: int

    def __post_init__(self):
        if self.correct > min(self.ground_truth, self.alarms) or self.correct < 0:
            raise InputError(
                f"Correct detections {self.correct} exceed min(N_GT={self.ground_truth}, "
                f"N_AL={self.alarms})"
            )


class Match(NamedTuple):
    counts: ConfusionCounts
    pairs: list


class RocPoint(NamedTuple):
    tau: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class EvalReport:
    counts: ConfusionCounts
    tpr: float
    fpr: float
    roc: tuple
    pr: float
    mse: float
    pl: object
    auc: float = 0.0
    tpr_at_fpr: float = 0.0
    tolerance: float = 0
    detector_id: str = ''


def _points(breakpoints):
    return list(getattr(breakpoints, 'breakpoints', breakpoints))


def _nearest(sorted_points, x):
    # ties go to the smaller index
    i = bisect.bisect_left(sorted_points, x)
    if i == 0:
        return sorted_points[0]
    if i == len(sorted_points):
        return sorted_points[-1]
    left, right = sorted_points[i - 1], sorted_points[i]
    return left if x - left <= right - x else right


def match_breakpoints(gt, al, cfg):
    """Count alarms that are mutual nearest neighbours of a true breakpoint within tau"""
    truth = _points(gt)
    alarms = _points(al)
    pairs = []
    if truth:
        for a in alarms:
            b = _nearest(truth, a)
            if _nearest(alarms, b) == a and abs(a - b) < cfg.tolerance:
                pairs.append((b, a))
    counts = ConfusionCounts(correct=len(pairs), ground_truth=len(truth), alarms=len(alarms))
    return Match(counts=counts, pairs=pairs)


def tpr_fpr(counts):
    """TPR = N_CR / N_GT and FPR = (N_AL - N_CR) / N_AL, FPR 0 without alarms"""
    if counts.ground_truth == 0:
        raise MetricUndefinedError("True positive rate is undefined without ground-truth breakpoints")
    tpr = counts.correct / counts.ground_truth
    fpr = (counts.alarms - counts.correct) / counts.alarms if counts.alarms else 0.0
    return tpr, fpr


def roc_sweep(gt, al, taus, cfg=None):
    """One (tau, tpr, fpr) point per toleration distance, matching recomputed per tau"""
    taus = list(taus)
    if not taus:
        raise ConfigError("ROC sweep needs at least one toleration distance")
    cfg = cfg or MatchConfig()
    points = []
    for tau in taus:
        counts = match_breakpoints(gt, al, MatchConfig(tau, cfg.pr_cap, cfg.mse_unit)).counts
        tpr, fpr = tpr_fpr(counts)
        points.append(RocPoint(tau=tau, tpr=tpr, fpr=fpr))
    return points


def roc_auc(points):
    """Trapezoidal area under the ROC polyline anchored at (0,0) and (1,1)"""
    ordered = sorted((p.fpr, p.tpr) for p in points)
    fpr = np.array([0.0] + [x for x, _ in ordered] + [1.0])
    tpr = np.array([0.0] + [y for _, y in ordered] + [1.0])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def tpr_at_fpr(points, target=0.2):
    """Best TPR among ROC points whose FPR does not exceed the target"""
    eligible = [p.tpr for p in points if p.fpr <= target]
    return max(eligible) if eligible else 0.0


def prediction_ratio(counts):
    """N_AL / N_GT"""
    if counts.ground_truth == 0:
        raise MetricUndefinedError("Prediction ratio is undefined without ground-truth breakpoints")
    return counts.alarms / counts.ground_truth


def mse_nearest(gt, al, unit=1.0):
    """Mean squared distance from each true breakpoint to its nearest detection, in units"""
    truth = _points(gt)
    alarms = _points(al)
    if not truth:
        raise MetricUndefinedError("MSE is undefined without ground-truth breakpoints")
    if not alarms:
        return math.inf
    gaps = [(_nearest(alarms, b) - b) / unit for b in truth]
    return float(np.mean(np.square(gaps)))


def prediction_loss(pr, mse, counts, pr_cap=100.0):
    """|1 - PR| * MSE, None (undefined) without alarms or above the prediction ratio cap"""
    if counts.alarms == 0 or pr > pr_cap:
        return None
    return abs(1.0 - pr) * mse


def evaluate(gt, al, cfg, taus=None, fpr_target=0.2):
    """All metrics for one detection against one label set"""
    taus = list(taus) if taus else [cfg.tolerance]
    counts = match_breakpoints(gt, al, cfg).counts
    tpr, fpr = tpr_fpr(counts)
    roc = roc_sweep(gt, al, taus, cfg)
    pr = prediction_ratio(counts)
    mse = mse_nearest(gt, al, cfg.mse_unit)
    pl = prediction_loss(pr, mse, counts, cfg.pr_cap)
    detector_id = getattr(al, 'detector_id', '')
    report = EvalReport(counts=counts, tpr=tpr, fpr=fpr, roc=tuple(roc), pr=pr, mse=mse, pl=pl,
                        auc=roc_auc(roc), tpr_at_fpr=tpr_at_fpr(roc, fpr_target),
                        tolerance=cfg.tolerance, detector_id=detector_id)
    logging.info(
        f"Evaluated {detector_id or 'detection'}: N_CR={counts.correct} N_GT={counts.ground_truth} "
        f"N_AL={counts.alarms} PR={format_metric(pr)} MSE={format_metric(mse)} PL={format_metric(pl)}"
    )
    return report


def format_metric(value):
    if value is None:
        return UNDEFINED_TOKEN
    if math.isinf(value):
        return INFINITY_TOKEN
    return f"{value:.6g}"


def _json_number(value):
    if value is None:
        return UNDEFINED_TOKEN
    if math.isinf(value):
        return INFINITY_TOKEN
    return value


def report_to_dict(report):
    return {
        'detector_id': report.detector_id,
        'tolerance': report.tolerance,
        'counts': {
            'N_CR': report.counts.correct,
            'N_GT': report.counts.ground_truth,
            'N_AL': report.counts.alarms,
        },
        'tpr': report.tpr,
        'fpr': report.fpr,
        'pr': _json_number(report.pr),
        'mse': _json_number(report.mse),
        'pl': _json_number(report.pl),
        'auc': report.auc,
        'tpr_at_fpr': report.tpr_at_fpr,
        'roc': [{'tau': p.tau, 'tpr': p.tpr, 'fpr': p.fpr} for p in report.roc],
    }


def save_reports(reports, path):
    """JSON document keyed by detector id"""
    path = Path(path)
    document = {name: report_to_dict(report) for name, report in reports.items()}
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(document, f, indent=2)
        f.write('\n')
    return path


def write_roc_csv(reports, path):
    rows = [
        {'detector': name, 'tau': p.tau, 'tpr': p.tpr, 'fpr': p.fpr}
        for name, report in reports.items()
        for p in report.roc
    ]
    pd.DataFrame(rows, columns=['detector', 'tau', 'tpr', 'fpr']).to_csv(
        path, index=False, lineterminator='\n')
    return Path(path)


def write_comparison_table(table, path):
    """Rows are detectors; every dataset contributes PR, MSE and PL columns"""
    detectors = []
    for reports in table.values():
        for name in reports:
            if name not in detectors:
                detectors.append(name)
    rows = []
    for name in detectors:
        row = {'detector': name}
        for dataset, reports in table.items():
            report = reports.get(name)
            for metric in ('PR', 'MSE', 'PL'):
                cell = format_metric(getattr(report, metric.lower())) if report is not None else ''
                row[f"{dataset} {metric}"] = cell
        rows.append(row)
    columns = ['detector'] + [f"{dataset} {metric}" for dataset in table
                              for metric in ('PR', 'MSE', 'PL')]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, lineterminator='\n')
    return Path(path)


def report_summary(name, report):
    """Human-readable block for the text report"""
    return (
        f"{name}:\n"
        f"  N_CR={report.counts.correct} N_GT={report.counts.ground_truth} "
        f"N_AL={report.counts.alarms} at tau={report.tolerance}\n"
        f"  TPR={report.tpr:.4f} FPR={report.fpr:.4f} AUC={report.auc:.4f} "
        f"TPR@FPR={report.tpr_at_fpr:.4f}\n"
        f"  PR={format_metric(report.pr)} MSE={format_metric(report.mse)} "
        f"PL={format_metric(report.pl)}\n"
    )

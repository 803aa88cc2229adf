#!/usr/bin/env python3
"""
Augur - Command Line Front End
License: GNU GPL

Reads a YAML configuration (command-line flags override file values, file
values override built-in defaults), runs one command and writes its
artifacts plus a manifest.json into the output directory.

Commands:
    synth           generate a seeded synthetic series with known breakpoints
    detect          run the autoencoder detector or a baseline on a series
    evaluate        score one or more detections against ground-truth labels
    suggest-window  print the window size heuristic for a label file
    sweep           sensitivity study over window size, depth and codebook ratio

Exit codes: 0 success, 2 configuration or input error, 3 training diverged.
"""

import argparse
import copy
import json
import logging
import os
import platform
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import scipy
import yaml

from augur import __version__
from augur.autoencoder import StackConfig, TrainConfig, save_stack
from augur.baselines import BocpdConfig, PeltConfig, bocpd_run, pelt_segment, preset, write_posterior_csv
from augur.detector import PeakConfig, load_detection, run_detection, save_detection, write_curve_csv
from augur.errors import AugurError, ConfigError, InputError, MetricUndefinedError, TrainingDivergedError
from augur.metrics import (
    MatchConfig,
    evaluate,
    format_metric,
    report_summary,
    save_reports,
    write_comparison_table,
    write_roc_csv,
)
from augur.series import config_digest, load_csv, load_labels, segment_size_cdf
from augur.synthgen import SynthConfig, generate, write
from augur.windowing import WindowConfig, suggest_window_size

METHODS = ('autoencoder', 'pelt', 'bocpd')
LOG_LEVEL_ENV = 'AUGUR_LOG_LEVEL'
DEFAULT_TAU_STEPS = 20

DEFAULT_CONFIG = {
    'seed': None,
    'dataset': None,
    'method': 'autoencoder',
    'variant': None,
    'logging': {'level': 'INFO', 'file': None},
    'input': {'series': None, 'labels': None, 'layout': 'columns', 'header': False, 'length': None},
    'output': {'directory': 'augur_out'},
    'window': {'size': None, 'stride': None},
    'autoencoder': {
        'depth': 2,
        'codebook_ratio': 0.1,
        'feature_dims': None,
        'learning_rate': 0.1,
        'weight_decay': 1e-4,
        'epochs': 50,
        'loss': 'square',
        'init_scale': 0.05,
        'activation': 'sigmoid',
    },
    'peaks': {'min_prominence': 0.05, 'min_separation': 1, 'smoothing': 1},
    'metrics': {'tolerance': None, 'taus': None, 'mse_unit': None, 'pr_cap': 100.0, 'fpr_target': 0.2},
    'pelt': {'cost': 'normal_mean', 'penalty': 'bic', 'min_segment': 2},
    'bocpd': {
        'model': 'gaussian',
        'a': 1.0,
        'b': 1.0,
        'mu': 0.0,
        'sigma': 1.0,
        'obs_sigma': 1.0,
        'hazard_rate': 250.0,
        'max_run_length': None,
        'threshold': 0.5,
        'dump_posterior': False,
    },
    'synth': {
        'kind': 'step_mean',
        'T': 2000,
        'k': 4,
        'low': 0.5,
        'high': 5.0,
        'noise_sigma': 1.0,
        'min_jump': 0.0,
        'channels': 1,
    },
    'sweep': {'window_sizes': [], 'depths': [], 'codebook_ratios': []},
}


def _merge(base, update, path=''):
    for key, value in update.items():
        if key not in base:
            logging.warning(f"Unknown configuration key {path}{key} ignored")
            continue
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"Configuration section {path}{key} must be a mapping")
            _merge(base[key], value, f"{path}{key}.")
        else:
            base[key] = value
    return base


def _build(factory, *args, **kwargs):
    """Construct a config object, turning type errors into configuration errors"""
    try:
        return factory(*args, **kwargs)
    except AugurError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid {factory.__name__} settings {kwargs}: {e}")


class AugurRunner:
    def __init__(self, config_file=None, overrides=None):
        self.config_file = config_file
        self.config = self.load_config()
        for dotted, value in (overrides or {}).items():
            self.set_value(dotted, value)
        self.setup_logging()
        self.artifacts = []

    def load_config(self):
        """Load configuration from YAML file on top of the built-in defaults"""
        config = copy.deepcopy(DEFAULT_CONFIG)
        if self.config_file is None:
            return config
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f)
        except FileNotFoundError:
            raise ConfigError(f"Configuration file {self.config_file} not found")
        except yaml.YAMLError as e:
            raise ConfigError(f"Error parsing configuration file {self.config_file}: {e}")
        if loaded is None:
            return config
        if not isinstance(loaded, dict):
            raise ConfigError(f"Configuration file {self.config_file} must hold a mapping")
        return _merge(config, loaded)

    def set_value(self, dotted, value):
        if value is None:
            return
        section, _, key = dotted.rpartition('.')
        target = self.config[section] if section else self.config
        target[key] = value

    def setup_logging(self):
        """Setup logging configuration"""
        log_level = os.environ.get(LOG_LEVEL_ENV) or self.section('logging').get('level', 'INFO')
        level = getattr(logging, str(log_level).upper(), None)
        if not isinstance(level, int):
            raise ConfigError(f"Unknown log level {log_level!r}")
        handlers = [logging.StreamHandler()]
        log_file = self.section('logging').get('file')
        if log_file:
            handlers.append(logging.FileHandler(log_file))

        logging.basicConfig(
            level=level,
            format='%(asctime)s - %(levelname)s - %(message)s',
            handlers=handlers
        )
        logging.getLogger().setLevel(level)
        logging.debug("Augur logging initialized")

    def section(self, name):
        return self.config.get(name) or {}

    def require_seed(self):
        seed = self.config.get('seed')
        if seed is None:
            raise ConfigError("A seed is required for this command (--seed or 'seed' in the config)")
        try:
            seed = int(seed)
        except (TypeError, ValueError):
            raise ConfigError(f"Seed must be a non-negative integer, got {seed!r}")
        if seed < 0:
            raise ConfigError(f"Seed must be a non-negative integer, got {seed}")
        return seed

    def output_dir(self):
        directory = Path(self.section('output').get('directory') or 'augur_out')
        directory.mkdir(parents=True, exist_ok=True)
        return directory

    def record(self, path):
        self.artifacts.append(Path(path).name)
        return path

    # --- configuration accessors ---

    def load_series(self):
        source = self.section('input')
        if not source.get('series'):
            raise ConfigError("No input series given (--input or input.series)")
        return load_csv(source['series'], layout=source.get('layout', 'columns'),
                        header=bool(source.get('header', False)))

    def load_ground_truth(self, length):
        path = self.section('input').get('labels')
        if not path:
            raise ConfigError("No label file given (--labels or input.labels)")
        return load_labels(path, length)

    def series_length(self):
        length = self.section('input').get('length')
        if length is not None:
            return int(length)
        return self.load_series().length

    def window_config(self, labels=None, length=None):
        window = self.section('window')
        size = window.get('size')
        if size is None:
            if labels is None:
                raise ConfigError("No window size given (--window-size or window.size)")
            size = suggest_window_size(labels, length)
            logging.info(f"Window size not configured, using heuristic size {size}")
        return _build(WindowConfig, window_size=size, stride=window.get('stride'))

    def stack_config(self, seed):
        ae = self.section('autoencoder')
        train = _build(
            TrainConfig,
            learning_rate=float(ae.get('learning_rate', 0.1)),
            weight_decay=float(ae.get('weight_decay', 1e-4)),
            epochs=ae.get('epochs', 50),
            seed=seed,
            loss=ae.get('loss', 'square'),
            init_scale=float(ae.get('init_scale', 0.05)),
            activation=ae.get('activation', 'sigmoid'),
        )
        dims = ae.get('feature_dims')
        return _build(
            StackConfig,
            layer_feature_dims=tuple(dims) if dims else None,
            train=train,
            depth=ae.get('depth', 2),
            codebook_ratio=float(ae.get('codebook_ratio', 0.1)),
        )

    def peak_config(self):
        peaks = self.section('peaks')
        return _build(
            PeakConfig,
            min_prominence=float(peaks.get('min_prominence', 0.05)),
            min_separation=peaks.get('min_separation', 1),
            smoothing=peaks.get('smoothing', 1),
        )

    def match_config(self, window_cfg):
        metrics = self.section('metrics')
        tolerance = metrics.get('tolerance')
        mse_unit = metrics.get('mse_unit')
        return _build(
            MatchConfig,
            tolerance=window_cfg.window_size if tolerance is None else float(tolerance),
            pr_cap=float(metrics.get('pr_cap', 100.0)),
            mse_unit=window_cfg.stride if mse_unit is None else float(mse_unit),
        )

    def taus(self, window_cfg):
        taus = self.section('metrics').get('taus')
        if taus:
            return [float(tau) for tau in taus]
        return [step * window_cfg.stride for step in range(1, DEFAULT_TAU_STEPS + 1)]

    def pelt_config(self):
        pelt = self.section('pelt')
        return _build(PeltConfig, cost=pelt.get('cost', 'normal_mean'),
                      penalty=pelt.get('penalty', 'bic'), min_segment=pelt.get('min_segment', 2))

    def bocpd_config(self):
        bocpd = dict(self.section('bocpd'))
        bocpd.pop('dump_posterior', None)
        return _build(BocpdConfig, **bocpd)

    def baseline(self):
        """(method, config) from the variant preset or the configured method"""
        variant = self.config.get('variant')
        if variant:
            return preset(variant)
        method = self.config.get('method', 'autoencoder')
        if method not in METHODS:
            raise ConfigError(f"Unknown method {method!r}, expected one of {METHODS}")
        if method == 'pelt':
            return method, self.pelt_config()
        if method == 'bocpd':
            return method, self.bocpd_config()
        return method, None

    # --- output helpers ---

    def write_manifest(self, command, out_dir):
        manifest = {
            'command': command,
            'config_digest': config_digest(self.config),
            'config': self.config,
            'artifacts': sorted(self.artifacts),
            'versions': {
                'augur': __version__,
                'python': platform.python_version(),
                'numpy': np.__version__,
                'scipy': scipy.__version__,
                'pandas': pd.__version__,
                'pyyaml': yaml.__version__,
            },
        }
        path = Path(out_dir) / 'manifest.json'
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(manifest, f, indent=2, sort_keys=True, default=str)
            f.write('\n')
        return path

    def save_report_to_file(self, out_dir, dataset, labels_path, labels, reports):
        """Save the human-readable evaluation summary"""
        body = ''.join(report_summary(name, report) + '\n' for name, report in reports.items())
        report_content = f"""AUGUR BREAKPOINT EVALUATION REPORT
==================================
Dataset: {dataset}
Labels: {labels_path}
Ground-truth breakpoints: {len(labels.breakpoints)}

{body}"""
        path = Path(out_dir) / 'report.txt'
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(report_content)
        logging.info(f"Report saved to file: {path}")
        return self.record(path)

    # --- commands ---

    def cmd_synth(self):
        """Generate a synthetic series and its labels"""
        synth = self.section('synth')
        cfg = _build(SynthConfig, seed=self.require_seed(), **synth)
        series, labels = generate(cfg)
        out_dir = self.output_dir()
        series_path, labels_path = write(series, labels, out_dir)
        self.record(series_path)
        self.record(labels_path)
        self.write_manifest('synth', out_dir)
        print(f"Generated {cfg.kind}: {series.channels} x {series.length} samples, "
              f"{len(labels.breakpoints)} breakpoints -> {series_path}, {labels_path}")
        return series_path, labels_path

    def cmd_detect(self):
        """Run the configured detector and write its detection"""
        series = self.load_series()
        method, baseline_cfg = self.baseline()
        out_dir = self.output_dir()

        if method == 'autoencoder':
            seed = self.require_seed()
            labels = None
            if self.section('window').get('size') is None and self.section('input').get('labels'):
                labels = self.load_ground_truth(series.length)
            window_cfg = self.window_config(labels, series.length)
            run = run_detection(series, window_cfg, self.stack_config(seed), self.peak_config())
            result = run.result
            self.record(write_curve_csv(run.curve, out_dir / 'curve.csv'))
            self.record(save_stack(run.stack, out_dir / 'model.json'))
        elif method == 'pelt':
            result = pelt_segment(series, baseline_cfg)
        else:
            bocpd = bocpd_run(series, baseline_cfg, keep_posterior=bool(self.section('bocpd').get('dump_posterior')))
            result = bocpd.result
            if self.section('bocpd').get('dump_posterior'):
                self.record(write_posterior_csv(bocpd.posterior, out_dir / 'posterior.csv'))

        if not result.breakpoints:
            logging.warning(f"{result.detector_id} reported no breakpoints")
        self.record(save_detection(result, out_dir / 'detection.json'))
        self.write_manifest('detect', out_dir)
        print(f"{result.detector_id}: {len(result.breakpoints)} breakpoints {list(result.breakpoints)}")
        return result

    def cmd_evaluate(self, detection_paths):
        """Score detections against the labels and write the report files"""
        if not detection_paths:
            raise ConfigError("No detection files to evaluate")
        length = self.series_length()
        labels = self.load_ground_truth(length)
        window_cfg = self.window_config(labels, length)
        match_cfg = self.match_config(window_cfg)
        taus = self.taus(window_cfg)
        fpr_target = float(self.section('metrics').get('fpr_target', 0.2))

        reports = {}
        for path in detection_paths:
            detection = load_detection(path).check_length(length)
            name = detection.detector_id or Path(path).stem
            if name in reports:
                name = f"{name}@{Path(path).parent.name or Path(path).stem}"
            reports[name] = evaluate(labels, detection, match_cfg, taus, fpr_target)

        dataset = self.config.get('dataset') or Path(
            self.section('input').get('series') or self.section('input')['labels']).stem
        out_dir = self.output_dir()
        self.record(save_reports(reports, out_dir / 'report.json'))
        self.record(write_roc_csv(reports, out_dir / 'roc.csv'))
        self.record(write_comparison_table({dataset: reports}, out_dir / 'table.csv'))
        self.save_report_to_file(out_dir, dataset, self.section('input')['labels'], labels, reports)
        self.write_manifest('evaluate', out_dir)
        for name, report in reports.items():
            print(f"{name}: PR={format_metric(report.pr)} MSE={format_metric(report.mse)} "
                  f"PL={format_metric(report.pl)} AUC={report.auc:.4f}")
        return reports

    def cmd_suggest_window(self, write_cdf=False):
        """Print the window size at CDF 0.1 of the true segment sizes"""
        length = self.series_length()
        labels = self.load_ground_truth(length)
        size = suggest_window_size(labels, length)
        if write_cdf:
            out_dir = self.output_dir()
            sizes, cdf = segment_size_cdf(labels, length)
            path = out_dir / 'segment_sizes.csv'
            pd.DataFrame({'size': sizes, 'cdf': cdf}).to_csv(path, index=False, lineterminator='\n')
            self.record(path)
            self.write_manifest('suggest-window', out_dir)
        print(size)
        return size

    def cmd_sweep(self):
        """Vary one autoencoder setting at a time and score every run"""
        seed = self.require_seed()
        series = self.load_series()
        labels = self.load_ground_truth(series.length)
        reference = self.window_config(labels, series.length)
        match_cfg = self.match_config(reference)
        taus = self.taus(reference)
        fpr_target = float(self.section('metrics').get('fpr_target', 0.2))
        stack_cfg = self.stack_config(seed)
        peak_cfg = self.peak_config()
        sweep = self.section('sweep')

        runs = []
        for size in sweep.get('window_sizes') or []:
            window_cfg = _build(WindowConfig, window_size=size, stride=self.section('window').get('stride'))
            runs.append(('window_size', size, window_cfg, stack_cfg))
        for depth in sweep.get('depths') or []:
            runs.append(('depth', depth, reference,
                         _build(replace, stack_cfg, layer_feature_dims=None, depth=depth)))
        for ratio in sweep.get('codebook_ratios') or []:
            runs.append(('codebook_ratio', ratio, reference,
                         _build(replace, stack_cfg, layer_feature_dims=None, codebook_ratio=float(ratio))))
        if not runs:
            raise ConfigError("Sweep has no values (sweep.window_sizes, sweep.depths, sweep.codebook_ratios)")

        rows, roc_rows = [], []
        for parameter, value, window_cfg, cfg in runs:
            logging.info(f"Sweep {parameter}={value}")
            result = run_detection(series, window_cfg, cfg, peak_cfg).result
            report = evaluate(labels, result, match_cfg, taus, fpr_target)
            rows.append({
                'parameter': parameter,
                'value': value,
                'auc': report.auc,
                'tpr_at_fpr': report.tpr_at_fpr,
                'pr': format_metric(report.pr),
                'mse': format_metric(report.mse),
                'pl': format_metric(report.pl),
            })
            roc_rows.extend({'parameter': parameter, 'value': value, 'tau': p.tau, 'tpr': p.tpr, 'fpr': p.fpr}
                            for p in report.roc)

        out_dir = self.output_dir()
        sweep_path = out_dir / 'sweep.csv'
        pd.DataFrame(rows, columns=['parameter', 'value', 'auc', 'tpr_at_fpr', 'pr', 'mse', 'pl']).to_csv(
            sweep_path, index=False, lineterminator='\n')
        roc_path = out_dir / 'sweep_roc.csv'
        pd.DataFrame(roc_rows, columns=['parameter', 'value', 'tau', 'tpr', 'fpr']).to_csv(
            roc_path, index=False, lineterminator='\n')
        self.record(sweep_path)
        self.record(roc_path)
        self.write_manifest('sweep', out_dir)
        print(f"Sweep of {len(runs)} runs written to {sweep_path}")
        return rows


def _add_common_options(parser, default=None):
    parser.add_argument('--config', '-c', default=default,
                        help='Configuration file path (YAML)')
    parser.add_argument('--seed', type=int, default=default,
                        help='Random seed (required by synth, detect and sweep)')
    parser.add_argument('--out', '-o', default=default, help='Output directory (default: augur_out)')


def build_parser():
    parser = argparse.ArgumentParser(prog='augur', description='Augur - Time Series Breakpoint Detection Tool')
    _add_common_options(parser)
    # accepted after the command too; SUPPRESS keeps a value given before it
    common = argparse.ArgumentParser(add_help=False)
    _add_common_options(common, default=argparse.SUPPRESS)
    commands = parser.add_subparsers(dest='command', required=True)

    synth = commands.add_parser('synth', parents=[common], help='Generate a synthetic series with known breakpoints')
    synth.add_argument('--kind', choices=['step_mean', 'exponential_segments'])
    synth.add_argument('--T', type=int, dest='T', help='Series length')
    synth.add_argument('--k', type=int, help='Number of breakpoints')
    synth.add_argument('--low', type=float, help='Lower end of the segment parameter range')
    synth.add_argument('--high', type=float, help='Upper end of the segment parameter range')
    synth.add_argument('--noise-sigma', type=float, help='Gaussian noise for step_mean')
    synth.add_argument('--min-jump', type=float, help='Minimum gap between consecutive step_mean means')
    synth.add_argument('--channels', type=int, help='Number of channels')

    detect = commands.add_parser('detect', parents=[common], help='Detect breakpoints in a series')
    detect.add_argument('--input', '-i', help='Series CSV file')
    detect.add_argument('--labels', help='Label file (only used to pick a window size)')
    detect.add_argument('--layout', choices=['columns', 'rows'])
    detect.add_argument('--header', action='store_true', default=None, help='CSV has a header row')
    detect.add_argument('--method', choices=list(METHODS))
    detect.add_argument('--variant', choices=['PE', 'PM', 'PV', 'PP', 'BG1', 'BG2'],
                        help='Named baseline preset')
    detect.add_argument('--window-size', type=int)
    detect.add_argument('--stride', type=int)
    detect.add_argument('--depth', type=int)
    detect.add_argument('--epochs', type=int)
    detect.add_argument('--cost', help='PELT cost model')
    detect.add_argument('--model', help='BOCPD model')

    evaluate_cmd = commands.add_parser('evaluate', parents=[common], help='Evaluate detections against labels')
    evaluate_cmd.add_argument('detections', nargs='+', help='Detection JSON files')
    evaluate_cmd.add_argument('--labels', help='Label file')
    evaluate_cmd.add_argument('--input', '-i', help='Series CSV file (for its length)')
    evaluate_cmd.add_argument('--length', type=int, help='Series length, instead of --input')
    evaluate_cmd.add_argument('--window-size', type=int)
    evaluate_cmd.add_argument('--stride', type=int)
    evaluate_cmd.add_argument('--tolerance', type=float, help='Reference toleration distance')
    evaluate_cmd.add_argument('--dataset', help='Dataset name for the comparison table')

    suggest = commands.add_parser('suggest-window', parents=[common], help='Print the window size heuristic')
    suggest.add_argument('--labels', help='Label file')
    suggest.add_argument('--input', '-i', help='Series CSV file (for its length)')
    suggest.add_argument('--length', type=int, help='Series length, instead of --input')

    sweep = commands.add_parser('sweep', parents=[common], help='Sensitivity study of the autoencoder detector')
    sweep.add_argument('--input', '-i', help='Series CSV file')
    sweep.add_argument('--labels', help='Label file')
    sweep.add_argument('--window-size', type=int)
    return parser


# argparse destination -> dotted configuration key
OVERRIDES = {
    'seed': 'seed',
    'out': 'output.directory',
    'kind': 'synth.kind',
    'T': 'synth.T',
    'k': 'synth.k',
    'low': 'synth.low',
    'high': 'synth.high',
    'noise_sigma': 'synth.noise_sigma',
    'min_jump': 'synth.min_jump',
    'channels': 'synth.channels',
    'input': 'input.series',
    'labels': 'input.labels',
    'layout': 'input.layout',
    'header': 'input.header',
    'length': 'input.length',
    'method': 'method',
    'variant': 'variant',
    'window_size': 'window.size',
    'stride': 'window.stride',
    'depth': 'autoencoder.depth',
    'epochs': 'autoencoder.epochs',
    'cost': 'pelt.cost',
    'model': 'bocpd.model',
    'tolerance': 'metrics.tolerance',
    'dataset': 'dataset',
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    arguments = vars(args)
    overrides = {key: arguments[dest] for dest, key in OVERRIDES.items() if arguments.get(dest) is not None}

    try:
        runner = AugurRunner(args.config, overrides)
        if args.command == 'detect' and args.method:
            runner.config['variant'] = None

        if args.command == 'synth':
            runner.cmd_synth()
        elif args.command == 'detect':
            runner.cmd_detect()
        elif args.command == 'evaluate':
            runner.cmd_evaluate(args.detections)
        elif args.command == 'suggest-window':
            runner.cmd_suggest_window(write_cdf=args.out is not None)
        elif args.command == 'sweep':
            runner.cmd_sweep()

    except TrainingDivergedError as e:
        logging.error(f"Training diverged: {e}")
        return 3
    except (ConfigError, InputError, MetricUndefinedError) as e:
        logging.error(f"Fatal error: {e}")
        return 2
    except OSError as e:
        logging.error(f"I/O error on {e.filename}: {e.strerror}" if e.filename else f"I/O error: {e}")
        return 2

    return 0


if __name__ == '__main__':
    raise SystemExit(main())

import json
import logging

import pandas as pd
import pytest
import yaml

from augur.cli import AugurRunner, main
from augur.detector import save_detection
from augur.errors import ConfigError
from augur.series import DetectionResult, LabelSet, write_labels


@pytest.fixture
def synthetic(tmp_path):
    out = tmp_path / 'synth'
    assert main(['--seed', '7', '--out', str(out), 'synth', '--kind', 'step_mean', '--T', '2000', '--k', '4',
                 '--low', '1', '--high', '11', '--noise-sigma', '0.5', '--min-jump', '3']) == 0
    return out / 'synth.csv', out / 'synth_labels.txt'


def read_bytes(directory, names):
    return {name: (directory / name).read_bytes() for name in names}


class TestConfig:
    def test_flags_override_file(self, tmp_path):
        config = tmp_path / 'augur.yaml'
        config.write_text(yaml.safe_dump({'seed': 1, 'window': {'size': 30}, 'synth': {'T': 500}}))
        runner = AugurRunner(str(config), {'seed': 9, 'synth.k': 2})
        assert runner.config['seed'] == 9
        assert runner.config['window']['size'] == 30
        assert runner.config['synth']['T'] == 500
        assert runner.config['synth']['k'] == 2
        assert runner.config['pelt']['cost'] == 'normal_mean'

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError, match='not found'):
            AugurRunner(str(tmp_path / 'absent.yaml'))

    def test_bad_yaml_exits_2(self, tmp_path):
        config = tmp_path / 'augur.yaml'
        config.write_text('window: [unclosed\n')
        assert main(['--config', str(config), 'suggest-window', '--length', '100']) == 2

    def test_section_must_be_mapping(self, tmp_path):
        config = tmp_path / 'augur.yaml'
        config.write_text('window: 5\n')
        with pytest.raises(ConfigError):
            AugurRunner(str(config))

    def test_log_level_from_environment(self, monkeypatch):
        monkeypatch.setenv('AUGUR_LOG_LEVEL', 'verbose')
        with pytest.raises(ConfigError):
            AugurRunner()


class TestSynth:
    def test_writes_series_labels_and_manifest(self, synthetic, capsys):
        series_path, labels_path = synthetic
        assert len(labels_path.read_text().splitlines()) == 4
        assert len(series_path.read_text().splitlines()) == 2000
        manifest = json.loads((series_path.parent / 'manifest.json').read_text())
        assert manifest['command'] == 'synth'
        assert manifest['artifacts'] == ['synth.csv', 'synth_labels.txt']
        assert len(manifest['config_digest']) == 64
        assert 'numpy' in manifest['versions']

    def test_rerun_is_byte_identical(self, synthetic, tmp_path):
        series_path, _ = synthetic
        again = tmp_path / 'again'
        main(['--seed', '7', '--out', str(again), 'synth', '--kind', 'step_mean', '--T', '2000', '--k', '4',
              '--low', '1', '--high', '11', '--noise-sigma', '0.5', '--min-jump', '3'])
        names = ['synth.csv', 'synth_labels.txt']
        assert read_bytes(again, names) == read_bytes(series_path.parent, names)

    def test_min_segment_violation_exits_2(self, tmp_path):
        assert main(['--seed', '7', '--out', str(tmp_path), 'synth', '--T', '2000', '--k', '1999']) == 2

    def test_seed_required(self, tmp_path):
        assert main(['--out', str(tmp_path), 'synth']) == 2

    def test_common_flags_after_command(self, synthetic, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(['synth', '--kind', 'step_mean', '--T', '2000', '--k', '4', '--seed', '7']) == 0
        assert len((tmp_path / 'augur_out' / 'synth_labels.txt').read_text().splitlines()) == 4

        again = tmp_path / 'again'
        assert main(['synth', '--kind', 'step_mean', '--T', '2000', '--k', '4', '--low', '1', '--high', '11',
                     '--noise-sigma', '0.5', '--min-jump', '3', '--seed', '7', '--out', str(again)]) == 0
        names = ['synth.csv', 'synth_labels.txt']
        assert read_bytes(again, names) == read_bytes(synthetic[0].parent, names)

    def test_flag_before_command_survives(self, tmp_path):
        out = tmp_path / 'before'
        assert main(['--seed', '7', 'synth', '--T', '200', '--k', '2', '--out', str(out)]) == 0
        assert (out / 'synth.csv').is_file()

    def test_output_path_is_a_file_exits_2(self, tmp_path, caplog):
        blocker = tmp_path / 'taken'
        blocker.write_text('not a directory\n')
        with caplog.at_level(logging.ERROR):
            code = main(['synth', '--seed', '7', '--T', '200', '--k', '2', '--out', str(blocker)])
        assert code == 2
        assert 'taken' in caplog.text


class TestDetect:
    def test_autoencoder(self, synthetic, tmp_path):
        series_path, _ = synthetic
        out = tmp_path / 'ae'
        assert main(['--seed', '7', '--out', str(out), 'detect', '--input', str(series_path),
                     '--window-size', '50']) == 0
        document = json.loads((out / 'detection.json').read_text())
        assert document['detector_id'].startswith('autoencoder:')
        assert len(document['breakpoints']) >= 1
        curve = pd.read_csv(out / 'curve.csv')
        assert list(curve.columns) == ['timestamp', 'distance']
        assert len(curve) == (2000 - 50) // 25
        assert (out / 'model.json').is_file()

    def test_autoencoder_rerun_is_byte_identical(self, synthetic, tmp_path):
        series_path, _ = synthetic
        runs = []
        for name in ('first', 'second'):
            out = tmp_path / name
            main(['--seed', '3', '--out', str(out), 'detect', '--input', str(series_path),
                  '--window-size', '40', '--epochs', '10'])
            runs.append(read_bytes(out, ['detection.json', 'curve.csv', 'model.json']))
        assert runs[0] == runs[1]

    def test_window_size_from_labels(self, synthetic, tmp_path):
        series_path, labels_path = synthetic
        out = tmp_path / 'ae'
        assert main(['--seed', '7', '--out', str(out), 'detect', '--input', str(series_path),
                     '--labels', str(labels_path), '--epochs', '5']) == 0
        assert (out / 'detection.json').is_file()

    def test_pelt_has_no_curve(self, synthetic, tmp_path):
        series_path, _ = synthetic
        out = tmp_path / 'pelt'
        assert main(['--out', str(out), 'detect', '--input', str(series_path),
                     '--method', 'pelt', '--cost', 'normal_mean']) == 0
        assert json.loads((out / 'detection.json').read_text())['curve'] is None
        assert not (out / 'curve.csv').exists()
        assert not (out / 'model.json').exists()

    def test_variant_preset(self, synthetic, tmp_path):
        series_path, _ = synthetic
        out = tmp_path / 'pm'
        assert main(['--out', str(out), 'detect', '--input', str(series_path), '--variant', 'PM']) == 0
        assert json.loads((out / 'detection.json').read_text())['detector_id'].startswith('pelt-normal_mean:')

    def test_bocpd_posterior_dump(self, synthetic, tmp_path):
        series_path, _ = synthetic
        config = tmp_path / 'augur.yaml'
        config.write_text(yaml.safe_dump({'bocpd': {'max_run_length': 50, 'dump_posterior': True}}))
        out = tmp_path / 'bocpd'
        assert main(['--config', str(config), '--out', str(out), 'detect', '--input', str(series_path),
                     '--method', 'bocpd']) == 0
        assert len((out / 'posterior.csv').read_text().splitlines()) == 52

    def test_missing_input_names_path(self, tmp_path, caplog):
        missing = tmp_path / 'nowhere.csv'
        with caplog.at_level(logging.ERROR):
            code = main(['--seed', '1', '--out', str(tmp_path), 'detect', '--input', str(missing)])
        assert code == 2
        assert 'nowhere.csv' in caplog.text

    def test_unknown_method_in_config(self, synthetic, tmp_path):
        series_path, _ = synthetic
        config = tmp_path / 'augur.yaml'
        config.write_text('method: magic\n')
        assert main(['--config', str(config), '--out', str(tmp_path), 'detect', '--input', str(series_path)]) == 2

    def test_diverged_training_exits_3(self, synthetic, tmp_path):
        series_path, _ = synthetic
        config = tmp_path / 'augur.yaml'
        config.write_text(yaml.safe_dump({'autoencoder': {'learning_rate': 1e6}}))
        assert main(['--config', str(config), '--seed', '1', '--out', str(tmp_path / 'x'), 'detect',
                     '--input', str(series_path), '--window-size', '50']) == 3


class TestEvaluate:
    def test_reports(self, tmp_path):
        labels_path = write_labels(LabelSet(breakpoints=(100, 200, 300)), tmp_path / 'labels.txt')
        perfect = save_detection(DetectionResult(breakpoints=(100, 200, 300), detector_id='perfect'),
                                 tmp_path / 'perfect.json')
        empty = save_detection(DetectionResult(detector_id='silent'), tmp_path / 'empty.json')
        out = tmp_path / 'eval'
        assert main(['--out', str(out), 'evaluate', str(perfect), str(empty), '--labels', str(labels_path),
                     '--length', '400', '--window-size', '20', '--dataset', 'toy']) == 0

        report = json.loads((out / 'report.json').read_text())
        assert (report['perfect']['tpr'], report['perfect']['fpr'], report['perfect']['pl']) == (1.0, 0.0, 0.0)
        assert (report['silent']['pr'], report['silent']['mse'], report['silent']['pl']) == (0.0, 'inf', 'undef')

        table = (out / 'table.csv').read_text().splitlines()
        assert table[0] == 'detector,toy PR,toy MSE,toy PL'
        assert table[2] == 'silent,0,inf,undef'

        roc = pd.read_csv(out / 'roc.csv')
        assert len(roc) == 2 * 20
        for _, rows in roc.groupby('detector'):
            assert rows['tpr'].is_monotonic_increasing
        assert 'PR=' in (out / 'report.txt').read_text()
        assert json.loads((out / 'manifest.json').read_text())['command'] == 'evaluate'

    def test_detection_beyond_series_exits_2(self, tmp_path):
        labels_path = write_labels(LabelSet(breakpoints=(100,)), tmp_path / 'labels.txt')
        detection = save_detection(DetectionResult(breakpoints=(450,), detector_id='late'), tmp_path / 'd.json')
        assert main(['--out', str(tmp_path), 'evaluate', str(detection), '--labels', str(labels_path),
                     '--length', '400', '--window-size', '20']) == 2

    def test_end_to_end(self, synthetic, tmp_path):
        series_path, labels_path = synthetic
        main(['--out', str(tmp_path / 'pelt'), 'detect', '--input', str(series_path), '--method', 'pelt'])
        assert main(['--out', str(tmp_path / 'eval'), 'evaluate', str(tmp_path / 'pelt' / 'detection.json'),
                     '--input', str(series_path), '--labels', str(labels_path), '--window-size', '50']) == 0
        report = json.loads((tmp_path / 'eval' / 'report.json').read_text())
        (name, entry), = report.items()
        assert name.startswith('pelt-normal_mean:')
        assert entry['tpr'] == 1.0


class TestSuggestWindow:
    def test_prints_size(self, tmp_path, capsys):
        labels_path = tmp_path / 'labels.txt'
        labels_path.write_text('10\n30\n60\n100\n150\n210\n280\n360\n450\n')
        assert main(['suggest-window', '--labels', str(labels_path), '--length', '550']) == 0
        assert capsys.readouterr().out.strip() == '10'

    def test_writes_cdf_with_output_directory(self, tmp_path):
        labels_path = write_labels(LabelSet(breakpoints=(25, 75)), tmp_path / 'labels.txt')
        out = tmp_path / 'cdf'
        assert main(['--out', str(out), 'suggest-window', '--labels', str(labels_path), '--length', '100']) == 0
        assert (out / 'segment_sizes.csv').read_text() == 'size,cdf\n25,0.3333333333333333\n25,0.6666666666666666\n50,1.0\n'

    def test_needs_two_segments(self, tmp_path):
        labels_path = tmp_path / 'labels.txt'
        labels_path.write_text('')
        assert main(['suggest-window', '--labels', str(labels_path), '--length', '100']) == 2


def test_sweep(synthetic, tmp_path):
    series_path, labels_path = synthetic
    config = tmp_path / 'augur.yaml'
    config.write_text(yaml.safe_dump({
        'autoencoder': {'epochs': 5},
        'sweep': {'window_sizes': [40, 80], 'depths': [1], 'codebook_ratios': [0.2]},
    }))
    out = tmp_path / 'sweep'
    assert main(['--config', str(config), '--seed', '4', '--out', str(out), 'sweep', '--input', str(series_path),
                 '--labels', str(labels_path), '--window-size', '50']) == 0
    sweep = pd.read_csv(out / 'sweep.csv')
    assert list(sweep.columns) == ['parameter', 'value', 'auc', 'tpr_at_fpr', 'pr', 'mse', 'pl']
    assert sweep['parameter'].tolist() == ['window_size', 'window_size', 'depth', 'codebook_ratio']
    roc = pd.read_csv(out / 'sweep_roc.csv')
    assert len(roc) == 4 * 20


def assert_rerun_identical(argv, out, names):
    assert main(argv) == 0
    first = read_bytes(out, names)
    assert main(argv) == 0
    assert read_bytes(out, names) == first


class TestReruns:
    def test_evaluate(self, synthetic, tmp_path):
        series_path, labels_path = synthetic
        main(['--out', str(tmp_path / 'pelt'), 'detect', '--input', str(series_path), '--method', 'pelt'])
        out = tmp_path / 'eval'
        assert_rerun_identical(
            ['evaluate', str(tmp_path / 'pelt' / 'detection.json'), '--input', str(series_path),
             '--labels', str(labels_path), '--window-size', '50', '--out', str(out)],
            out, ['report.json', 'roc.csv', 'table.csv', 'report.txt', 'manifest.json'])

    def test_suggest_window(self, synthetic, tmp_path):
        _, labels_path = synthetic
        out = tmp_path / 'cdf'
        assert_rerun_identical(
            ['suggest-window', '--labels', str(labels_path), '--length', '2000', '--out', str(out)],
            out, ['segment_sizes.csv', 'manifest.json'])

    def test_bocpd_with_posterior(self, synthetic, tmp_path):
        series_path, _ = synthetic
        config = tmp_path / 'augur.yaml'
        config.write_text(yaml.safe_dump({'bocpd': {'max_run_length': 40, 'dump_posterior': True}}))
        out = tmp_path / 'bocpd'
        assert_rerun_identical(
            ['detect', '--config', str(config), '--input', str(series_path), '--method', 'bocpd', '--out', str(out)],
            out, ['detection.json', 'posterior.csv', 'manifest.json'])

    def test_sweep(self, synthetic, tmp_path):
        series_path, labels_path = synthetic
        config = tmp_path / 'augur.yaml'
        config.write_text(yaml.safe_dump({
            'autoencoder': {'epochs': 3},
            'sweep': {'window_sizes': [40], 'depths': [1], 'codebook_ratios': [0.2]},
        }))
        out = tmp_path / 'sweep'
        assert_rerun_identical(
            ['sweep', '--config', str(config), '--seed', '4', '--input', str(series_path),
             '--labels', str(labels_path), '--window-size', '50', '--out', str(out)],
            out, ['sweep.csv', 'sweep_roc.csv', 'manifest.json'])

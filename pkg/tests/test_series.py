import logging

import numpy as np
import pytest

from augur.errors import InputError
from augur.series import (
    DetectionResult,
    LabelSet,
    TimeSeries,
    config_digest,
    load_csv,
    load_labels,
    segment_size_cdf,
    true_segment_sizes,
    write_csv,
    write_labels,
)


class TestTimeSeries:
    def test_one_dimensional_input_is_one_channel(self):
        series = TimeSeries(values=[1.0, 2.0, 3.0])
        assert series.channels == 1
        assert series.length == 3

    def test_values_are_read_only(self):
        series = TimeSeries(values=[[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ValueError):
            series.values[0, 0] = 5.0

    def test_rejects_single_sample(self):
        with pytest.raises(InputError):
            TimeSeries(values=[[1.0]])

    def test_rejects_non_finite(self):
        with pytest.raises(InputError, match='channel 1, timestamp 0'):
            TimeSeries(values=[[1.0, 2.0], [np.inf, 0.0]])

    def test_channel_names_must_match(self):
        with pytest.raises(InputError):
            TimeSeries(values=[[1.0, 2.0]], channel_names=('a', 'b'))


class TestLabelTypes:
    def test_breakpoints_strictly_increasing(self):
        with pytest.raises(InputError):
            LabelSet(breakpoints=(10, 10))
        with pytest.raises(InputError):
            LabelSet(breakpoints=(0, 5))

    def test_segment_label_count(self):
        with pytest.raises(InputError):
            LabelSet(breakpoints=(5,), segment_labels=('a',))

    def test_check_length(self):
        LabelSet(breakpoints=(5, 9)).check_length(10)
        with pytest.raises(InputError):
            LabelSet(breakpoints=(5, 10)).check_length(10)
        with pytest.raises(InputError):
            DetectionResult(breakpoints=(12,), detector_id='x').check_length(10)


class TestLoadCsv:
    def test_channels_as_columns(self, write_text, rng):
        data = rng.normal(size=(100, 3))
        text = ''.join(','.join(repr(float(v)) for v in row) + '\n' for row in data)
        series = load_csv(write_text('s.csv', text), layout='columns')
        assert (series.channels, series.length) == (3, 100)
        np.testing.assert_array_equal(series.values, data.T)

    def test_minimum_series(self, write_text):
        series = load_csv(write_text('s.csv', '1.5\n2.5\n'))
        assert (series.channels, series.length) == (1, 2)

    def test_channels_as_rows(self, write_text):
        series = load_csv(write_text('s.csv', '1,2,3\n4,5,6\n'), layout='rows')
        np.testing.assert_array_equal(series.values, [[1, 2, 3], [4, 5, 6]])

    def test_header_names_channels(self, write_text):
        series = load_csv(write_text('s.csv', 'x,y\n1,2\n3,4\n'), header=True)
        assert series.channel_names == ('x', 'y')
        np.testing.assert_array_equal(series.values, [[1, 3], [2, 4]])

    def test_nan_cell_is_named(self, write_text):
        with pytest.raises(InputError, match='line 2, column 2'):
            load_csv(write_text('s.csv', '1,2\n3,NaN\n5,6\n'))

    def test_unparsable_cell_is_named(self, write_text):
        with pytest.raises(InputError, match='line 1, column 1'):
            load_csv(write_text('s.csv', 'abc,2\n3,4\n'))

    def test_first_bad_cell_in_long_file_is_named(self, write_text):
        rows = [f"{i},{i + 0.5},{-i}" for i in range(1000)]
        rows[640] = '640,640.5,oops'
        rows[900] = 'x,900.5,-900'
        with pytest.raises(InputError, match="'oops'.*line 641, column 3"):
            load_csv(write_text('s.csv', '\n'.join(rows) + '\n'))

    def test_infinite_cell_is_named(self, write_text):
        with pytest.raises(InputError, match='line 3, column 1'):
            load_csv(write_text('s.csv', '1\n2\ninf\n4\n'))

    def test_empty_file(self, write_text):
        with pytest.raises(InputError, match='empty'):
            load_csv(write_text('s.csv', ''))

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(InputError, match='nowhere.csv'):
            load_csv(tmp_path / 'nowhere.csv')

    @pytest.mark.parametrize('layout', ['columns', 'rows'])
    def test_write_then_load_is_bit_identical(self, tmp_path, rng, layout):
        series = TimeSeries(values=rng.normal(size=(2, 57)) * 1e3)
        path = write_csv(series, tmp_path / 's.csv', layout=layout, header=False)
        loaded = load_csv(path, layout=layout, header=False)
        assert loaded.values.shape == series.values.shape
        assert np.array_equal(loaded.values, series.values)


class TestLabels:
    def test_sorted(self, write_text):
        labels = load_labels(write_text('l.txt', '40\n10\n'), 100)
        assert labels.breakpoints == (10, 40)

    def test_out_of_range(self, write_text):
        with pytest.raises(InputError, match='out of range'):
            load_labels(write_text('l.txt', '120\n'), 100)
        with pytest.raises(InputError):
            load_labels(write_text('l.txt', '0\n'), 100)

    def test_non_integer(self, write_text):
        with pytest.raises(InputError, match='line 2'):
            load_labels(write_text('l.txt', '10\n12.5\n'), 100)

    def test_duplicates_dropped_with_warning(self, write_text, caplog):
        with caplog.at_level(logging.WARNING):
            labels = load_labels(write_text('l.txt', '10\n10\n20\n'), 100)
        assert labels.breakpoints == (10, 20)
        assert 'Duplicate breakpoint 10' in caplog.text

    def test_comments_and_segment_labels(self, write_text):
        labels = load_labels(write_text('l.txt', '# header\n\n10,walk\n40,run\n'), 100)
        assert labels.breakpoints == (10, 40)
        assert labels.segment_labels == ('', 'walk', 'run')

    def test_write_labels_reads_back(self, tmp_path):
        labels = LabelSet(breakpoints=(3, 8), segment_labels=('', 'up', ''))
        path = write_labels(labels, tmp_path / 'l.txt')
        assert path.read_text() == '3,up\n8\n'
        assert load_labels(path, 10) == labels


class TestSegmentSizes:
    @pytest.mark.parametrize('breakpoints, length, expected', [
        ((10, 40), 100, [10, 30, 60]),
        ((), 100, [100]),
        ((1, 2, 3), 4, [1, 1, 1, 1]),
    ])
    def test_examples(self, breakpoints, length, expected):
        assert true_segment_sizes(LabelSet(breakpoints=breakpoints), length) == expected

    def test_sum_and_count(self, rng):
        for _ in range(50):
            length = int(rng.integers(2, 300))
            k = int(rng.integers(0, length))
            breakpoints = np.sort(rng.choice(np.arange(1, length), size=k, replace=False))
            sizes = true_segment_sizes(LabelSet(breakpoints=breakpoints), length)
            assert sum(sizes) == length
            assert len(sizes) == k + 1
            assert min(sizes) >= 1

    def test_cdf(self):
        sizes, cdf = segment_size_cdf(LabelSet(breakpoints=(10, 40)), 100)
        np.testing.assert_array_equal(sizes, [10, 30, 60])
        np.testing.assert_allclose(cdf, [1 / 3, 2 / 3, 1.0])


def test_config_digest_ignores_key_order():
    assert config_digest({'a': 1, 'b': {'c': 2}}) == config_digest({'b': {'c': 2}, 'a': 1})
    assert config_digest({'a': 1}) != config_digest({'a': 2})

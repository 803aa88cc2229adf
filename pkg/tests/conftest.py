import numpy as np
import pytest

from augur.series import TimeSeries


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def step_series():
    """Four noisy level shifts of 10 sigma: 0, 10, 0, 10, 0 with breakpoints at 100, 200, 300, 400"""
    noise = np.random.default_rng(3).normal(0.0, 1.0, 500)
    levels = np.repeat([0.0, 10.0, 0.0, 10.0, 0.0], 100)
    return TimeSeries(values=levels + noise)


@pytest.fixture
def write_text(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return _write

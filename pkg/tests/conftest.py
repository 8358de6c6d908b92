import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chartsignal.market_data import PriceSeries, business_days  # noqa: E402

ACCEPTANCE_LINES = []


def make_series(close, ticker="TST", open_=None, volume=None, spread=0.0):
    """Bars whose open is the previous close unless given; highs/lows hug the body."""
    close = np.asarray(close, dtype=float)
    if open_ is None:
        open_ = np.concatenate([[close[0]], close[:-1]])
    open_ = np.asarray(open_, dtype=float)
    high = np.maximum(open_, close) * (1 + spread)
    low = np.minimum(open_, close) * (1 - spread)
    vol = np.full(len(close), 1000.0) if volume is None else np.asarray(volume, dtype=float)
    return PriceSeries(ticker, business_days("2015-01-02", len(close)), open_, high, low,
                       close, close, vol)


@pytest.fixture
def series_factory():
    return make_series


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

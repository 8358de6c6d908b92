"""Moving averages, Bollinger Bands, MACD, RSI and crossing detection.

Every indicator is a float array aligned 1:1 with its input, with NaN marking the
warm-up span where it is undefined. Once defined, values stay defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BB_WINDOW = 20
BB_K = 2.0
MACD_FAST, MACD_SLOW, MACD_SIGNAL = 12, 26, 9
RSI_PERIOD = 14
RSI_BUY_LEVEL = 30.0


def _as_float(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


def _first_defined(x: np.ndarray) -> int:
    ok = ~np.isnan(x)
    return int(np.argmax(ok)) if ok.any() else len(x)


def sma(values, window: int) -> np.ndarray:
    """Trailing simple moving average, inclusive of the current day."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = _as_float(values)
    out = np.full(len(x), np.nan)
    if window <= len(x):
        out[window - 1:] = sliding_window_view(x, window).mean(axis=1)
    return out


def rolling_std(values, window: int) -> np.ndarray:
    """Trailing population standard deviation (divides by ``window``)."""
    if window < 2:
        raise ValueError("window must be >= 2")
    x = _as_float(values)
    out = np.full(len(x), np.nan)
    if window <= len(x):
        w = sliding_window_view(x, window)
        dev = w - w.mean(axis=1, keepdims=True)
        out[window - 1:] = np.sqrt((dev * dev).mean(axis=1))
    return out


def ema(values, period: int) -> np.ndarray:
    """Exponential moving average with alpha = 2/(period+1).

    Leading NaNs are skipped; the average is seeded with the SMA of the first
    ``period`` defined values and placed at the last of them.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    x = _as_float(values)
    out = np.full(len(x), np.nan)
    start = _first_defined(x)
    seed_at = start + period - 1
    if seed_at >= len(x):
        return out
    alpha = 2.0 / (period + 1)
    prev = float(np.mean(x[start:seed_at + 1]))
    out[seed_at] = prev
    xs = x.tolist()
    for t in range(seed_at + 1, len(x)):
        prev = alpha * xs[t] + (1.0 - alpha) * prev
        out[t] = prev
    return out


@dataclass(frozen=True)
class BollingerBands:
    middle: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    window: int = BB_WINDOW
    k: float = BB_K


@dataclass(frozen=True)
class MacdLines:
    macd: np.ndarray
    signal: np.ndarray
    periods: tuple[int, int, int] = (MACD_FAST, MACD_SLOW, MACD_SIGNAL)


@dataclass(frozen=True)
class RsiSeries:
    rsi: np.ndarray
    period: int = RSI_PERIOD


def bollinger(series, window: int = BB_WINDOW, k: float = BB_K) -> BollingerBands:
    price = series.adj_close
    mid = sma(price, window)
    sd = rolling_std(price, window)
    return BollingerBands(mid, mid + k * sd, mid - k * sd, window, k)


def macd_lines(series, fast: int = MACD_FAST, slow: int = MACD_SLOW,
               signal: int = MACD_SIGNAL) -> MacdLines:
    price = series.adj_close
    macd = ema(price, fast) - ema(price, slow)
    return MacdLines(macd, ema(macd, signal), (fast, slow, signal))


def rsi_from_prices(price, period: int = RSI_PERIOD) -> np.ndarray:
    price = _as_float(price)
    delta = np.full(len(price), np.nan)
    delta[1:] = np.diff(price)
    gains = ema(np.where(np.isnan(delta), np.nan, np.maximum(delta, 0.0)), period)
    losses = ema(np.where(np.isnan(delta), np.nan, np.maximum(-delta, 0.0)), period)
    out = np.full(len(price), np.nan)
    ok = ~np.isnan(gains)
    g, l = gains[ok], losses[ok]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(l > 0, 100.0 - 100.0 / (1.0 + g / l), np.where(g > 0, 100.0, 50.0))
    out[ok] = r
    return out


def rsi(series, period: int = RSI_PERIOD) -> RsiSeries:
    return RsiSeries(rsi_from_prices(series.adj_close, period), period)


def cross_above(value, threshold) -> np.ndarray:
    """Indices t with value[t-1] <= threshold[t-1] and value[t] > threshold[t].

    ``threshold`` may be a scalar or an aligned array; indices where either side
    is undefined at t-1 or t never qualify.
    """
    v = _as_float(value)
    th = np.broadcast_to(_as_float(threshold), v.shape)
    if len(v) < 2:
        return np.empty(0, dtype=np.int64)
    prev_ok = (v[:-1] <= th[:-1])
    cur_ok = (v[1:] > th[1:])
    # comparisons with NaN are False, which already excludes undefined points
    return np.flatnonzero(prev_ok & cur_ok) + 1


def dump_indicator_csv(dates, values, path) -> Path:
    """Write ``date,value`` rows; undefined values are left empty."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "value"])
        for d, v in zip(dates, _as_float(values)):
            w.writerow([str(d), "" if np.isnan(v) else repr(float(v))])
    return path

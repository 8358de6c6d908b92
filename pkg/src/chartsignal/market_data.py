"""Daily OHLCV series: CSV ingest, validation, and a synthetic generator."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("date", "open", "high", "low", "close", "adj_close", "volume")
PRICE_FIELDS = ("open", "high", "low", "close", "adj_close")


class DataError(ValueError):
    """Raised for malformed or invariant-violating market data."""


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    adj_close: float
    volume: float


def _bar_problem(o, h, l, c, a, v) -> str | None:
    if min(o, h, l, c, a) <= 0:
        return "non-positive price"
    if v < 0:
        return "negative volume"
    if l > min(o, c):
        return "low above min(open, close)"
    if h < max(o, c):
        return "high below max(open, close)"
    return None


class PriceSeries:
    """Validated per-ticker daily bars, stored column-wise.

    Dates are strictly increasing. Columns are read-only numpy arrays so that
    slices can be shared between windows without copying.
    """

    def __init__(self, ticker, dates, open, high, low, close, adj_close, volume):
        self.ticker = str(ticker)
        self.dates = np.array(dates, dtype="datetime64[D]")
        cols = {}
        for name, values in zip(
            ("open", "high", "low", "close", "adj_close", "volume"),
            (open, high, low, close, adj_close, volume),
        ):
            arr = np.array(values, dtype=np.float64)
            if arr.shape != self.dates.shape:
                raise DataError(f"{self.ticker}: column {name!r} length mismatch")
            arr.setflags(write=False)
            cols[name] = arr
        self.dates.setflags(write=False)
        self.open = cols["open"]
        self.high = cols["high"]
        self.low = cols["low"]
        self.close = cols["close"]
        self.adj_close = cols["adj_close"]
        self.volume = cols["volume"]
        self._validate()

    def _validate(self):
        n = len(self.dates)
        if n == 0:
            raise DataError(f"{self.ticker}: empty series")
        if n > 1:
            steps = np.diff(self.dates).astype(np.int64)
            if np.any(steps <= 0):
                i = int(np.argmax(steps <= 0)) + 1
                raise DataError(f"{self.ticker}: dates not strictly increasing at {self.dates[i]}")
        prices = np.stack([self.open, self.high, self.low, self.close, self.adj_close])
        bad = (
            ~np.all(np.isfinite(prices), axis=0)
            | ~np.isfinite(self.volume)
            | np.any(prices <= 0, axis=0)
            | (self.volume < 0)
            | (self.low > np.minimum(self.open, self.close))
            | (self.high < np.maximum(self.open, self.close))
        )
        if np.any(bad):
            i = int(np.argmax(bad))
            why = _bar_problem(*(float(x) for x in self.row(i))) or "non-finite value"
            raise DataError(f"{self.ticker}: invalid bar on {self.dates[i]}: {why}")

    @classmethod
    def from_bars(cls, ticker, bars) -> PriceSeries:
        bars = list(bars)
        return cls(
            ticker,
            [np.datetime64(b.date, "D") for b in bars],
            [b.open for b in bars],
            [b.high for b in bars],
            [b.low for b in bars],
            [b.close for b in bars],
            [b.adj_close for b in bars],
            [b.volume for b in bars],
        )

    def row(self, i):
        return (self.open[i], self.high[i], self.low[i], self.close[i],
                self.adj_close[i], self.volume[i])

    def __len__(self):
        return len(self.dates)

    def __getitem__(self, i) -> OhlcvBar:
        if isinstance(i, slice):
            raise TypeError("use PriceSeries.slice for ranges")
        return OhlcvBar(self.dates[i].item(), *(float(x) for x in self.row(i)))

    @property
    def bars(self) -> list[OhlcvBar]:
        return [self[i] for i in range(len(self))]

    def slice(self, start: int, stop: int) -> PriceSeries:
        s = slice(start, stop)
        return PriceSeries(self.ticker, self.dates[s], self.open[s], self.high[s], self.low[s],
                           self.close[s], self.adj_close[s], self.volume[s])

    def index_of(self, date) -> int:
        d = np.datetime64(date, "D")
        i = int(np.searchsorted(self.dates, d))
        if i >= len(self.dates) or self.dates[i] != d:
            raise KeyError(f"{self.ticker}: no bar on {d}")
        return i

    def __eq__(self, other):
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return self.ticker == other.ticker and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("dates",) + PRICE_FIELDS + ("volume",)
        )

    def __repr__(self):
        return f"PriceSeries({self.ticker!r}, {len(self)} bars, {self.dates[0]}..{self.dates[-1]})"


def parse_csv_series(path, ticker: str | None = None) -> PriceSeries:
    """Read one ``<TICKER>.csv`` file; rows may be in any date order."""
    path = Path(path)
    ticker = ticker or path.stem
    rows = []
    seen = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise DataError(f"{path}: header must be {','.join(CSV_COLUMNS)}, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(CSV_COLUMNS):
                raise DataError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
            try:
                date = dt.date.fromisoformat(rec[0].strip())
                vals = [float(f) for f in rec[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if date in seen:
                raise DataError(f"{path}:{lineno}: duplicate date {date} (first on line {seen[date]})")
            seen[date] = lineno
            problem = _bar_problem(*vals)
            if problem:
                raise DataError(f"{path}:{lineno}: invalid bar on {date}: {problem}")
            rows.append((date, *vals))
    if not rows:
        raise DataError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    cols = list(zip(*rows))
    return PriceSeries(ticker, [np.datetime64(d, "D") for d in cols[0]], *cols[1:])


def write_csv_series(series: PriceSeries, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(len(series)):
            # repr round-trips floats exactly
            w.writerow([str(series.dates[i])] + [repr(float(x)) for x in series.row(i)])
    return path


def load_corpus(directory) -> list[PriceSeries]:
    files = sorted(Path(directory).glob("*.csv"))
    if not files:
        raise DataError(f"{directory}: no *.csv files")
    return [parse_csv_series(f) for f in files]


@dataclass(frozen=True)
class SyntheticModel:
    """Geometric random walk with multiplicative intraday spread and lognormal volume."""

    drift: float = 5e-4
    volatility: float = 0.02
    start_price: float = 100.0
    spread: float = 0.01
    volume_mean: float = 1e6
    volume_sigma: float = 0.3
    start_date: str = "2010-01-04"

    def validate(self):
        if not self.start_price > 0:
            raise ValueError("start_price must be positive")
        if self.volatility < 0:
            raise ValueError("volatility must be non-negative")
        if self.spread < 0 or self.volume_mean < 0 or self.volume_sigma < 0:
            raise ValueError("spread and volume parameters must be non-negative")


def business_days(start, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def generate_synthetic_series(seed: int, n_days: int, model: SyntheticModel | None = None,
                              ticker: str | None = None) -> PriceSeries:
    """Deterministic synthetic daily bars.

    Opens gap from the previous close by a fraction of the daily noise; highs and
    lows extend ``max/min(open, close)`` by half-normal amounts scaled by ``spread``.
    """
    model = model or SyntheticModel()
    model.validate()
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n_days)
    log_ret = (model.drift - 0.5 * model.volatility ** 2) + model.volatility * z
    close = model.start_price * np.exp(np.cumsum(log_ret))
    prev = np.concatenate([[model.start_price], close[:-1]])
    gap = 0.25 * model.volatility * rng.standard_normal(n_days)
    open_ = prev * np.exp(gap)
    u = np.abs(rng.standard_normal(n_days)) * model.spread
    v = np.abs(rng.standard_normal(n_days)) * model.spread
    high = np.maximum(open_, close) * (1.0 + u)
    low = np.minimum(open_, close) * (1.0 - np.minimum(v, 0.5))
    volume = model.volume_mean * np.exp(model.volume_sigma * rng.standard_normal(n_days)
                                        - 0.5 * model.volume_sigma ** 2)
    return PriceSeries(ticker or f"SYN{seed}", business_days(model.start_date, n_days),
                       open_, high, low, close, close.copy(), volume)


def generate_synthetic_corpus(n_tickers: int, n_days: int, seed: int = 0,
                              model: SyntheticModel | None = None) -> list[PriceSeries]:
    seeds = np.random.SeedSequence(seed).spawn(n_tickers)
    out = []
    for i, ss in enumerate(seeds):
        s = int(ss.generate_state(1)[0])
        out.append(generate_synthetic_series(s, n_days, model, ticker=f"T{i:04d}"))
    return out


def window_bars(obj) -> PriceSeries:
    """The PriceSeries behind a window sample, or ``obj`` itself."""
    return obj if isinstance(obj, PriceSeries) else obj.bars

"""Out-of-sample rolling-window signal prediction."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import VotingEnsemble, featurize
from .labeler import RuleKind, rule_state
from .market_data import PriceSeries
from .raster import NATIVE_SIDE, RenderStyle, render
from .resample import downscale

logger = logging.getLogger(__name__)

FORECAST_COLUMNS = ("ticker", "date", "vote_fraction", "predicted", "true")


@dataclass(frozen=True)
class ForecastRecord:
    ticker: str
    date: np.datetime64
    vote_fraction: float
    predicted: int
    true: int | None


def _range_indices(series: PriceSeries, date_range) -> np.ndarray:
    idx = np.arange(len(series))
    if not date_range:
        return idx
    lo, hi = date_range
    m = np.ones(len(series), dtype=bool)
    if lo is not None:
        m &= series.dates >= np.datetime64(lo, "D")
    if hi is not None:
        m &= series.dates <= np.datetime64(hi, "D")
    return idx[m]


def rolling_predict(series: PriceSeries, model: VotingEnsemble, rule: RuleKind,
                    style=RenderStyle.CANDLE_OHLC, resolution: int = 30, date_range=None,
                    window_days: int | None = None, native: int = NATIVE_SIDE,
                    threshold: float | None = None) -> list[ForecastRecord]:
    """Vote on the trailing window ending at every day in ``date_range``.

    Only bars up to and including each day enter its image. True labels come from
    the same crossing rule used for training, when the day is labelable.
    """
    rule = RuleKind(rule)
    style = RenderStyle(style)
    wd = window_days or rule.window_days
    th = model.threshold if threshold is None else threshold
    days = _range_indices(series, date_range)
    short = days[days < wd - 1]
    if len(short):
        logger.warning("%s: %d day(s) lack %d bars of history; skipped",
                       series.ticker, len(short), wd)
    days = days[days >= wd - 1]
    if len(days) == 0:
        return []
    state = rule_state(series, rule, wd)
    labelable = set(state.admissible.tolist())
    events = set(state.events.tolist())
    X = np.vstack([
        featurize(downscale(render(series.slice(t - wd + 1, t + 1), style, (native, native)),
                            resolution))
        for t in days
    ])
    frac = model.vote_fractions(X)
    return [
        ForecastRecord(series.ticker, series.dates[t], float(f), int(f > th),
                       (int(t in events) if t in labelable else None))
        for t, f in zip(days.tolist(), frac)
    ]


def apply_threshold(records, threshold: float) -> list[ForecastRecord]:
    return [ForecastRecord(r.ticker, r.date, r.vote_fraction, int(r.vote_fraction > threshold),
                           r.true) for r in records]


def forecast_scores(records) -> dict:
    """Recall, precision and false-alarm rate over records with a true label."""
    rs = [r for r in records if r.true is not None]
    pred = np.array([r.predicted for r in rs], dtype=np.int64)
    true = np.array([r.true for r in rs], dtype=np.int64)
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    neg = int(np.sum(true == 0))
    return {
        "n": len(rs),
        "true_positives": tp,
        "recall": tp / (tp + fn) if tp + fn else None,
        "precision": tp / (tp + fp) if tp + fp else None,
        "false_alarm_rate": fp / neg if neg else None,
        "predicted_positive_rate": float(pred.mean()) if len(rs) else None,
    }


def write_forecast_csv(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_COLUMNS)
        for r in records:
            w.writerow([r.ticker, str(r.date), repr(float(r.vote_fraction)), r.predicted,
                        "" if r.true is None else r.true])
    return path


def read_forecast_csv(path) -> list[ForecastRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            ForecastRecord(row["ticker"], np.datetime64(row["date"], "D"),
                           float(row["vote_fraction"]), int(row["predicted"]),
                           None if row["true"] == "" else int(row["true"]))
            for row in csv.DictReader(fh)
        ]


def emit_signal_chart(series: PriceSeries, records, rule: RuleKind, path) -> Path:
    from .plotting import save_figure, signal_chart

    if not records:
        raise ValueError("no forecast records to chart")
    return save_figure(signal_chart(series, records, rule), path)

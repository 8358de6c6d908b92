"""Buy-signal detection and class-balanced window sampling."""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import indicators as ind
from .market_data import PriceSeries

logger = logging.getLogger(__name__)

FIXED_WINDOW_DAYS = 30


class RuleKind(str, enum.Enum):
    BB = "BB"
    MACD = "MACD"
    RSI = "RSI"

    @property
    def window_days(self) -> int:
        return RULE_WINDOW_DAYS[self]


RULE_WINDOW_DAYS = {RuleKind.BB: 20, RuleKind.MACD: 26, RuleKind.RSI: 27}


def window_days_for(rule: RuleKind, fixed30: bool = False) -> int:
    return FIXED_WINDOW_DAYS if fixed30 else RuleKind(rule).window_days


def _bb_lines(series):
    return series.adj_close, ind.bollinger(series).lower


def _macd_lines(series):
    m = ind.macd_lines(series)
    return m.macd, m.signal


def _rsi_lines(series):
    return ind.rsi(series).rsi, ind.RSI_BUY_LEVEL


# Each trigger maps a series to (value, threshold); a buy is value crossing above
# threshold. Swap an entry to change a rule's definition everywhere.
TRIGGERS: dict[RuleKind, Callable] = {
    RuleKind.BB: _bb_lines,
    RuleKind.MACD: _macd_lines,
    RuleKind.RSI: _rsi_lines,
}


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class SignalEvent:
    ticker: str
    index: int
    date: np.datetime64
    rule: RuleKind
    label: int = 1


@dataclass(frozen=True)
class WindowSample:
    ticker: str
    end_index: int
    rule: RuleKind
    label: int
    bars: PriceSeries = field(repr=False, compare=False)

    @property
    def end_date(self) -> np.datetime64:
        return self.bars.dates[-1]

    @property
    def window_days(self) -> int:
        return len(self.bars)


@dataclass
class Dataset:
    rule: RuleKind
    window_days: int
    samples: list[WindowSample]

    def __len__(self):
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def class_counts(self) -> dict[int, int]:
        y = self.labels
        return {0: int((y == 0).sum()), 1: int((y == 1).sum())}

    def with_labels(self, labels) -> Dataset:
        return Dataset(self.rule, self.window_days, [
            WindowSample(s.ticker, s.end_index, s.rule, int(lab), s.bars)
            for s, lab in zip(self.samples, labels)
        ])


@dataclass(frozen=True)
class RuleState:
    """Per-series trigger evaluation, computed once and reused for sampling."""

    events: np.ndarray
    admissible: np.ndarray


def rule_state(series: PriceSeries, rule: RuleKind, window_days: int | None = None) -> RuleState:
    rule = RuleKind(rule)
    wd = window_days or rule.window_days
    value, threshold = TRIGGERS[rule](series)
    th = np.broadcast_to(np.asarray(threshold, dtype=np.float64), value.shape)
    defined = ~np.isnan(value) & ~np.isnan(th)
    # a crossing at t needs both t-1 and t defined
    labelable = np.zeros(len(series), dtype=bool)
    labelable[1:] = defined[1:] & defined[:-1]
    labelable[: wd - 1] = False
    events = ind.cross_above(value, th)
    return RuleState(events=events, admissible=np.flatnonzero(labelable))


def detect_signals(series: PriceSeries, rule: RuleKind,
                   window_days: int | None = None) -> list[SignalEvent]:
    """Positive buy events for ``rule`` on days that admit a full window."""
    rule = RuleKind(rule)
    st = rule_state(series, rule, window_days)
    ok = set(st.admissible.tolist())
    return [SignalEvent(series.ticker, int(t), series.dates[t], rule)
            for t in st.events.tolist() if t in ok]


def extract_window(series: PriceSeries, end_index: int, rule: RuleKind,
                   window_days: int | None = None, state: RuleState | None = None) -> WindowSample:
    rule = RuleKind(rule)
    wd = window_days or rule.window_days
    state = state or rule_state(series, rule, wd)
    if end_index >= len(series) or end_index < 0:
        raise LabelError(f"{series.ticker}: index {end_index} outside series of {len(series)} bars")
    pos = np.searchsorted(state.admissible, end_index)
    if pos >= len(state.admissible) or state.admissible[pos] != end_index:
        raise LabelError(
            f"{series.ticker}: index {end_index} lacks history for a {wd}-day {rule.value} window")
    label = int(np.isin(end_index, state.events))
    return WindowSample(series.ticker, int(end_index), rule, label,
                        series.slice(end_index - wd + 1, end_index + 1))


def ticker_rng(seed: int, ticker: str, rule: RuleKind) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}|{ticker}|{RuleKind(rule).value}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _date_mask(series: PriceSeries, idx: np.ndarray, date_range) -> np.ndarray:
    if not date_range:
        return np.ones(len(idx), dtype=bool)
    lo, hi = date_range
    d = series.dates[idx]
    m = np.ones(len(idx), dtype=bool)
    if lo is not None:
        m &= d >= np.datetime64(lo, "D")
    if hi is not None:
        m &= d <= np.datetime64(hi, "D")
    return m


def sample_balanced_dataset(corpus, rule: RuleKind, per_ticker: int = 10, seed: int = 0,
                            window_days: int | None = None, date_range=None,
                            exclusion_radius: int = 0) -> Dataset:
    """Draw ``min(per_ticker, #positives)`` buy and as many no-buy windows per ticker."""
    corpus = list(corpus)
    if not corpus:
        raise LabelError("empty corpus")
    rule = RuleKind(rule)
    wd = window_days or rule.window_days
    samples: list[WindowSample] = []
    for series in corpus:
        st = rule_state(series, rule, wd)
        adm = st.admissible[_date_mask(series, st.admissible, date_range)]
        is_pos = np.isin(adm, st.events)
        pos = adm[is_pos]
        neg = adm[~is_pos]
        if exclusion_radius > 0 and len(st.events):
            dist = np.min(np.abs(neg[:, None] - st.events[None, :]), axis=1) if len(neg) else neg
            neg = neg[dist > exclusion_radius]
        n = min(per_ticker, len(pos), len(neg))
        if n == 0:
            logger.warning("%s: no admissible %s windows of both classes; skipped",
                           series.ticker, rule.value)
            continue
        rng = ticker_rng(seed, series.ticker, rule)
        chosen_pos = np.sort(rng.choice(pos, size=n, replace=False))
        chosen_neg = np.sort(rng.choice(neg, size=n, replace=False))
        picks = sorted([(int(t), 1) for t in chosen_pos] + [(int(t), 0) for t in chosen_neg])
        for t, lab in picks:
            samples.append(WindowSample(series.ticker, t, rule, lab,
                                        series.slice(t - wd + 1, t + 1)))
    return Dataset(rule, wd, samples)

"""Static report figures: resolution sweep, representation comparison, signal charts."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import indicators as ind  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "chartsignal",
}
RULE_COLORS = {"BB": "tab:blue", "RSI": "tab:green", "MACD": "tab:red"}


def new_figure(ncols=1, width=7.0, height=3.0):
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, ncols, figsize=(width, height), squeeze=False)
    return fig, axes[0]


def save_figure(fig, path, dpi=120) -> Path:
    path = Path(path)
    with plt.rc_context(RC):
        fig.savefig(path, dpi=dpi, metadata={"Software": None})
    plt.close(fig)
    return path


def _by_rule(reports):
    out = {}
    for r in reports:
        out.setdefault(r.config.get("rule", "?"), []).append(r)
    return out


def resolution_chart(reports):
    """Mean accuracy/precision against image side, one line per rule, ±1 std bars."""
    fig, (ax_acc, ax_prec) = new_figure(2)
    for rule, reps in _by_rule(reports).items():
        reps = sorted(reps, key=lambda r: r.config["resolution"])
        side = [r.config["resolution"] for r in reps]
        color = RULE_COLORS.get(rule)
        for ax, metric in ((ax_acc, "accuracy"), (ax_prec, "precision")):
            stats = [getattr(r, metric) for r in reps]
            mean = [np.nan if m is None else m for m, _ in stats]
            std = [0.0 if s is None else s for _, s in stats]
            ax.errorbar(side, mean, yerr=std, marker="o", ms=3, capsize=2, color=color,
                        ecolor="black", elinewidth=0.8, label=rule)
    for ax, name in ((ax_acc, "accuracy"), (ax_prec, "precision")):
        ax.set_xscale("log")
        ax.set_xlabel("image side (pixels)")
        ax.set_ylabel(name)
        ax.set_ylim(0.4, 1.02)
        ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def comparison_chart(reports):
    """Grouped bars: representation on x, one bar per rule, ±1 std error bars."""
    fig, axes = new_figure(2)
    groups = _by_rule(reports)
    styles = list(dict.fromkeys(r.config["style"] for r in reports))
    width = 0.8 / max(len(groups), 1)
    x = np.arange(len(styles))
    for ax, metric in zip(axes, ("accuracy", "precision")):
        for j, (rule, reps) in enumerate(groups.items()):
            lookup = {r.config["style"]: getattr(r, metric) for r in reps}
            mean = [lookup.get(s, (None, None))[0] for s in styles]
            std = [lookup.get(s, (None, None))[1] for s in styles]
            ax.bar(x + (j - (len(groups) - 1) / 2) * width,
                   [np.nan if m is None else m for m in mean], width,
                   yerr=[0.0 if s is None else s for s in std], capsize=2,
                   color=RULE_COLORS.get(rule), label=rule, error_kw={"elinewidth": 0.8})
        ax.set_xticks(x)
        ax.set_xticklabels(styles, rotation=30, ha="right")
        ax.set_ylabel(metric)
        ax.set_ylim(0.4, 1.02)
    axes[0].legend(frameon=False, ncol=len(groups))
    fig.tight_layout()
    return fig


def signal_chart(series, records, rule):
    """Close line with 20-day mean and ±2σ bands, true and predicted buy markers."""
    bb = ind.bollinger(series)
    dates = series.dates
    lo = min(r.date for r in records)
    hi = max(r.date for r in records)
    shown = (dates >= lo) & (dates <= hi)
    fig, (ax,) = new_figure(1, width=8.0, height=3.5)
    d = dates[shown]
    ax.plot(d, series.adj_close[shown], color="black", lw=1.0, label="close")
    ax.plot(d, bb.middle[shown], color="tab:red", lw=0.8, label="20-day mean")
    ax.plot(d, bb.upper[shown], color="black", lw=0.6, ls="--", label="±2σ")
    ax.plot(d, bb.lower[shown], color="black", lw=0.6, ls="--")
    price = {t: p for t, p in zip(dates.tolist(), series.adj_close.tolist())}
    true_d = np.array([r.date for r in records if r.true == 1], dtype="datetime64[D]")
    pred_d = np.array([r.date for r in records if r.predicted == 1], dtype="datetime64[D]")
    ax.plot(true_d, [price[t] for t in true_d.tolist()], ls="none", marker="^", ms=7,
            color="tab:red", label=f"{getattr(rule, 'value', rule)} buy (rule)", gid="true")
    ax.plot(pred_d, [price[t] for t in pred_d.tolist()], ls="none", marker="v", ms=6,
            color="tab:blue", label="buy (predicted)", gid="predicted")
    ax.set_ylabel("price")
    ax.set_title(series.ticker)
    ax.legend(frameon=False, ncol=3, loc="upper left")
    fig.autofmt_xdate()
    fig.tight_layout()
    return fig

"""Command-line entry point.

Every command writes under ``<out>/<command>-<fingerprint>/`` where the
fingerprint hashes the command name and the full configuration, and echoes the
configuration there as ``config.json``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from .classify import (ClassifyError, dataset_features, image_features, load_model, save_model,
                       train_ensemble, VotingEnsemble)
from .config import ConfigError, RunConfig
from .forecast import emit_signal_chart, forecast_scores, rolling_predict, write_forecast_csv
from .labeler import LabelError, RuleKind, detect_signals, sample_balanced_dataset, window_days_for
from .market_data import (DataError, SyntheticModel, generate_synthetic_corpus, load_corpus,
                          write_csv_series)
from .raster import RenderStyle, render, save_png, save_raw
from .resample import downscale

logger = logging.getLogger("chartsignal")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
COMMANDS = ("ingest", "synth", "label", "build-dataset", "train", "evaluate", "sweep",
            "compare", "forecast")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers

def run_dir(cfg: RunConfig, command: str) -> Path:
    d = Path(cfg.out) / f"{command}-{cfg.fingerprint(command)}"
    d.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "fingerprint": cfg.fingerprint(command), "config": cfg.to_dict()}
    (d / "config.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                                   encoding="utf-8")
    return d


def _corpus(cfg: RunConfig):
    if not cfg.corpus:
        raise UsageError("this command needs --corpus (or 'corpus' in the config file)")
    return load_corpus(cfg.corpus)


def _datasets(cfg: RunConfig, corpus, date_range=None):
    out = []
    for r in cfg.rules:
        rule = RuleKind(r)
        ds = sample_balanced_dataset(corpus, rule, cfg.per_ticker, cfg.seed,
                                     window_days_for(rule, cfg.fixed30),
                                     date_range or cfg.train_range, cfg.exclusion_radius)
        if len(ds) == 0:
            raise LabelError(f"{rule.value}: no samples could be drawn from the corpus")
        counts = ds.class_counts()
        logger.info("%s dataset: %d buy / %d no-buy windows", rule.value, counts[1], counts[0])
        out.append(ds)
    return out


def _write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1, default=str) + "\n",
                    encoding="utf-8")
    return path


def _hp(cfg):
    return cfg.hyperparameters or None


# ---------------------------------------------------------------- commands

def cmd_ingest(cfg: RunConfig) -> Path:
    corpus = _corpus(cfg)
    d = run_dir(cfg, "ingest")
    summary = [{"ticker": s.ticker, "bars": len(s), "first": str(s.dates[0]),
                "last": str(s.dates[-1])} for s in corpus]
    _write_json(d / "ingest.json", {"fingerprint": cfg.fingerprint("ingest"), "series": summary})
    logger.info("validated %d series", len(corpus))
    return d


def cmd_synth(cfg: RunConfig) -> Path:
    d = run_dir(cfg, "synth")
    sc = dataclasses.asdict(cfg.synth)
    n_tickers, n_days = sc.pop("n_tickers"), sc.pop("n_days")
    corpus = generate_synthetic_corpus(n_tickers, n_days, cfg.seed, SyntheticModel(**sc))
    cdir = d / "corpus"
    cdir.mkdir(exist_ok=True)
    for s in corpus:
        write_csv_series(s, cdir / f"{s.ticker}.csv")
    logger.info("wrote %d synthetic series to %s", len(corpus), cdir)
    print(cdir)
    return d


def cmd_label(cfg: RunConfig) -> Path:
    corpus = _corpus(cfg)
    d = run_dir(cfg, "label")
    for r in cfg.rules:
        rule = RuleKind(r)
        path = d / f"signals_{rule.value}.csv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write("ticker,date,rule,label\n")
            for s in corpus:
                for e in detect_signals(s, rule, window_days_for(rule, cfg.fixed30)):
                    fh.write(f"{e.ticker},{e.date},{e.rule.value},{e.label}\n")
    return d


def cmd_build_dataset(cfg: RunConfig) -> Path:
    """Sample, render, downscale and write images plus ``manifest.json``.

    Image files that already exist are kept, so an interrupted run can be resumed.
    """
    corpus = _corpus(cfg)
    d = run_dir(cfg, "build-dataset")
    img_dir = d / "images"
    img_dir.mkdir(exist_ok=True)
    ext = ".png" if cfg.image_format == "png" else ".raw"
    saver = save_png if cfg.image_format == "png" else save_raw
    manifest = []
    for ds in _datasets(cfg, corpus):
        for s in ds.samples:
            for style in cfg.styles:
                native = None
                for res in cfg.resolutions:
                    name = f"{ds.rule.value}_{style}_{res}_{s.ticker}_{s.end_date}{ext}"
                    path = img_dir / name
                    if not path.exists():
                        native = native or render(s, style, (cfg.native_side, cfg.native_side))
                        tmp = path.with_suffix(".tmp")
                        saver(downscale(native, res), tmp)
                        tmp.replace(path)
                    manifest.append({"ticker": s.ticker, "end_date": str(s.end_date),
                                     "rule": ds.rule.value, "label": s.label, "style": style,
                                     "resolution": res, "image_path": f"images/{name}"})
    _write_json(d / "manifest.json", manifest)
    logger.info("manifest with %d entries", len(manifest))
    return d


def _train_cell(cfg, ds, style, res):
    X = dataset_features(ds.samples, style, res, cfg.native_side)
    meta = {"rule": ds.rule.value, "style": style, "resolution": res,
            "window_days": ds.window_days, "fingerprint": cfg.fingerprint("train")}
    return train_ensemble(cfg.classifiers, X, ds.labels, cfg.seed, _hp(cfg), meta, cfg.threshold)


def cmd_train(cfg: RunConfig) -> Path:
    corpus = _corpus(cfg)
    d = run_dir(cfg, "train")
    for ds in _datasets(cfg, corpus):
        for style in cfg.styles:
            for res in cfg.resolutions:
                ens = _train_cell(cfg, ds, style, res)
                mdir = d / "models" / f"{ds.rule.value}_{style}_{res}"
                mdir.mkdir(parents=True, exist_ok=True)
                for m in ens.members:
                    save_model(m, mdir / f"{m.kind.value}.json")
                _write_json(mdir / "ensemble.json", {
                    "threshold": ens.threshold, "members": [m.kind.value for m in ens.members],
                    "fingerprint": cfg.fingerprint("train")})
    return d


def load_ensemble(directory) -> VotingEnsemble:
    directory = Path(directory)
    doc = json.loads((directory / "ensemble.json").read_text(encoding="utf-8"))
    return VotingEnsemble([load_model(directory / f"{k}.json") for k in doc["members"]],
                          doc["threshold"])


def _write_reports(cfg, d, command, reports):
    ev.write_results_csv(reports, d / "results.csv")
    run_cfg = dict(cfg.to_dict(), command=command)
    run_cfg.pop("out")
    ev.write_aggregate_json(reports, d / "aggregate.json", run_cfg, cfg.fingerprint(command))
    ev.write_predictions_json(reports, d / "predictions.json")


def cmd_evaluate(cfg: RunConfig) -> Path:
    corpus = _corpus(cfg)
    d = run_dir(cfg, "evaluate")
    reports = []
    for ds in _datasets(cfg, corpus):
        folds = ev.stratified_kfold(ds.labels, cfg.k, cfg.seed)
        for style in cfg.styles:
            for res in cfg.resolutions:
                X = dataset_features(ds.samples, style, res, cfg.native_side)
                rep = ev.run_cv(X, ds.labels, cfg.classifiers, cfg.k, cfg.seed, folds=folds,
                                hyperparameters=_hp(cfg), threshold=cfg.threshold,
                                config={"rule": ds.rule.value, "style": style, "resolution": res})
                logger.info("%s %s %d: accuracy %.3f ± %.3f", ds.rule.value, style, res,
                            *rep.accuracy)
                reports.append(rep)
    _write_reports(cfg, d, "evaluate", reports)
    return d


def cmd_sweep(cfg: RunConfig) -> Path:
    from .plotting import resolution_chart, save_figure

    corpus = _corpus(cfg)
    d = run_dir(cfg, "sweep")
    reports = []
    for ds in _datasets(cfg, corpus):
        for style in cfg.styles:
            reports += ev.resolution_sweep(ds, cfg.sweep_resolutions, cfg.classifiers, style,
                                           cfg.k, cfg.seed, cfg.native_side, _hp(cfg))
    _write_reports(cfg, d, "sweep", reports)
    save_figure(resolution_chart(reports), d / "resolution_sweep.png")
    return d


def _summary_csv(path: Path, reports) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("rule,style,accuracy_mean,accuracy_std,precision_mean,precision_std\n")
        for r in reports:
            am, asd = r.accuracy
            pm, psd = r.precision
            fh.write(",".join([r.config["rule"], r.config["style"]]
                              + [ev._fmt(v) for v in (am, asd, pm, psd)]) + "\n")
    return path


def cmd_compare(cfg: RunConfig) -> Path:
    from .plotting import comparison_chart, save_figure

    corpus = _corpus(cfg)
    d = run_dir(cfg, "compare")
    res = cfg.resolutions[0]
    reps = [s.value for s in RenderStyle] + [ev.TABULAR]
    reports = ev.representation_comparison(_datasets(cfg, corpus), reps, res, cfg.classifiers,
                                           cfg.k, cfg.seed, cfg.native_side, _hp(cfg))
    _write_reports(cfg, d, "compare", reports)
    # image styles go in the style x rule table; the numeric baseline gets its own file
    _summary_csv(d / "comparison.csv", [r for r in reports if r.config["style"] != ev.TABULAR])
    _summary_csv(d / "baseline.csv", [r for r in reports if r.config["style"] == ev.TABULAR])
    save_figure(comparison_chart(reports), d / "comparison.png")
    return d


def cmd_forecast(cfg: RunConfig) -> Path:
    corpus = _corpus(cfg)
    if not cfg.test_range:
        raise UsageError("forecast needs a test_range (--test-range START END)")
    d = run_dir(cfg, "forecast")
    style, res = cfg.styles[0], cfg.resolutions[0]
    wanted = set(cfg.forecast_tickers or [s.ticker for s in corpus])
    summary = {}
    # without an explicit training range, train strictly before the forecast period
    train_range = cfg.train_range
    if not train_range:
        if cfg.test_range[0] is None:
            raise UsageError("forecast needs a test_range start or an explicit train_range")
        train_range = [None, str(np.datetime64(cfg.test_range[0], "D") - 1)]
    for ds in _datasets(cfg, corpus, train_range):
        ens = _train_cell(cfg, ds, style, res)
        records = []
        for s in corpus:
            if s.ticker not in wanted:
                continue
            recs = rolling_predict(s, ens, ds.rule, style, res, cfg.test_range, ds.window_days,
                                   cfg.native_side)
            if recs:
                emit_signal_chart(s, recs, ds.rule, d / f"chart_{ds.rule.value}_{s.ticker}.png")
            records += recs
        write_forecast_csv(records, d / f"forecast_{ds.rule.value}.csv")
        summary[ds.rule.value] = forecast_scores(records)
    _write_json(d / "forecast_summary.json",
                {"fingerprint": cfg.fingerprint("forecast"), "scores": summary})
    return d


HANDLERS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "label": cmd_label,
    "build-dataset": cmd_build_dataset, "train": cmd_train, "evaluate": cmd_evaluate,
    "sweep": cmd_sweep, "compare": cmd_compare, "forecast": cmd_forecast,
}


# ---------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chartsignal", description="Trading-signal recovery from chart images.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--corpus", help="directory of <TICKER>.csv files")
        sp.add_argument("--out", help="output root (default: runs)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--rule", action="append", choices=[r.value for r in RuleKind])
        sp.add_argument("--style", action="append", choices=[s.value for s in RenderStyle])
        sp.add_argument("--resolution", action="append", type=int)
        sp.add_argument("--per-ticker", type=int)
        sp.add_argument("--classifier", action="append")
        sp.add_argument("--fixed30", action="store_true", default=None)
        sp.add_argument("--train-range", nargs=2, metavar=("START", "END"))
        sp.add_argument("--test-range", nargs=2, metavar=("START", "END"))
        sp.add_argument("--threshold", type=float)
        if name == "synth":
            sp.add_argument("--n-tickers", type=int)
            sp.add_argument("--n-days", type=int)
        if name == "sweep":
            sp.add_argument("--sweep-resolution", action="append", type=int)
        if name == "forecast":
            sp.add_argument("--ticker", action="append")
    return p


def _none_if_dash(v):
    return None if v in ("-", "") else v


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    simple = {"corpus": args.corpus, "out": args.out, "seed": args.seed,
              "rules": args.rule, "styles": args.style, "resolutions": args.resolution,
              "per_ticker": args.per_ticker, "classifiers": args.classifier,
              "fixed30": args.fixed30, "threshold": args.threshold,
              "sweep_resolutions": getattr(args, "sweep_resolution", None),
              "forecast_tickers": getattr(args, "ticker", None)}
    for key, val in simple.items():
        if val is not None:
            setattr(cfg, key, val)
    if args.train_range:
        cfg.train_range = [_none_if_dash(v) for v in args.train_range]
    if args.test_range:
        cfg.test_range = [_none_if_dash(v) for v in args.test_range]
    if getattr(args, "n_tickers", None) is not None:
        cfg.synth.n_tickers = args.n_tickers
    if getattr(args, "n_days", None) is not None:
        cfg.synth.n_days = args.n_days
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        out = HANDLERS[args.command](cfg)
    except (ConfigError, UsageError) as exc:
        print(f"chartsignal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, LabelError, ClassifyError, ev.EvalError, FileNotFoundError) as exc:
        print(f"chartsignal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"chartsignal: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    logger.info("outputs in %s", out)
    if args.command != "synth":
        print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

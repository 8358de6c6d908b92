"""Stratified cross-validation and the resolution / representation experiments."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classify import (REQUIRED_KINDS, ClassifierKind, FeatureMode, dataset_features, featurize,
                       stack_features, train_ensemble)
from .labeler import Dataset
from .raster import NATIVE_SIDE, RenderStyle, render
from .resample import downscale

logger = logging.getLogger(__name__)

VOTING = "Voting"
TABULAR = FeatureMode.TABULAR.value
RESULT_COLUMNS = ("rule", "style", "resolution", "classifier", "fold", "accuracy", "precision")


class EvalError(ValueError):
    pass


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Partition sample indices into ``k`` folds preserving class proportions.

    Each class is shuffled and dealt round-robin; the dealing offset carries over
    between classes so fold sizes differ by at most one. ``k`` may exceed a class
    count (leave-one-out is ``k == len(labels)``) but every class needs two
    samples so each training split still sees it.
    """
    y = np.asarray(labels)
    if k < 2:
        raise EvalError("k must be >= 2")
    if len(y) < k:
        raise EvalError(f"{len(y)} samples cannot fill k={k} folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if len(idx) < 2:
            raise EvalError(f"class {cls} has {len(idx)} sample(s); need at least 2")
        idx = rng.permutation(idx)
        for j, i in enumerate(idx):
            folds[(offset + j) % k].append(int(i))
        offset = (offset + len(idx)) % k
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def score(predictions, truths) -> dict:
    """Accuracy and precision (buy = positive); precision is None with no predicted buys."""
    p = np.asarray(predictions).astype(np.int64)
    t = np.asarray(truths).astype(np.int64)
    if p.shape != t.shape:
        raise EvalError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise EvalError("empty predictions")
    tp = int(np.sum((p == 1) & (t == 1)))
    fp = int(np.sum((p == 1) & (t == 0)))
    return {
        "accuracy": float(np.mean(p == t)),
        "precision": tp / (tp + fp) if tp + fp else None,
    }


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.std(vals))


@dataclass
class FoldResult:
    fold: int
    test_indices: list[int]
    truths: list[int]
    predictions: dict[str, list[int]]

    def scores(self, classifier: str = VOTING) -> dict:
        return score(self.predictions[classifier], self.truths)


@dataclass
class EvalReport:
    config: dict
    folds: list[FoldResult] = field(default_factory=list)

    @property
    def fold_accuracy(self) -> list[float]:
        return [f.scores()["accuracy"] for f in self.folds]

    @property
    def fold_precision(self) -> list[float | None]:
        return [f.scores()["precision"] for f in self.folds]

    @property
    def accuracy(self) -> tuple[float, float]:
        return _mean_std(self.fold_accuracy)

    @property
    def precision(self) -> tuple[float | None, float | None]:
        return _mean_std(self.fold_precision)

    @property
    def mean_accuracy(self) -> float:
        return self.accuracy[0]

    @property
    def std_accuracy(self) -> float:
        return self.accuracy[1]

    @property
    def classifiers(self) -> list[str]:
        return list(self.folds[0].predictions) if self.folds else []

    def summary(self) -> dict:
        out = dict(self.config)
        out["fingerprint"] = fingerprint(self.config)
        out["metrics"] = {}
        for name in self.classifiers:
            acc = [f.scores(name)["accuracy"] for f in self.folds]
            prec = [f.scores(name)["precision"] for f in self.folds]
            am, asd = _mean_std(acc)
            pm, psd = _mean_std(prec)
            out["metrics"][name] = {
                "accuracy_mean": am, "accuracy_std": asd,
                "precision_mean": pm, "precision_std": psd,
                "fold_accuracy": acc, "fold_precision": prec,
            }
        return out


def fingerprint(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def run_cv(X, y, kinds=REQUIRED_KINDS, k: int = 5, seed: int = 0, folds=None,
           hyperparameters: dict | None = None, threshold: float = 0.5,
           config: dict | None = None) -> EvalReport:
    """Train the ensemble on each training split and vote on the held-out fold."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    folds = stratified_kfold(y, k, seed) if folds is None else folds
    kinds = [ClassifierKind(kd) for kd in kinds]
    cfg = {"k": len(folds), "seed": seed, "classifiers": [kd.value for kd in kinds],
           "threshold": threshold, "n_samples": int(len(y))}
    cfg.update(config or {})
    report = EvalReport(cfg)
    everything = np.arange(len(y))
    for i, test in enumerate(folds):
        train_idx = np.setdiff1d(everything, test)
        ens = train_ensemble(kinds, X[train_idx], y[train_idx], seed=seed,
                             hyperparameters=hyperparameters, threshold=threshold)
        preds = {m.kind.value: m.labels(X[test]).tolist() for m in ens.members}
        preds[VOTING] = ens.predict(X[test]).tolist()
        report.folds.append(FoldResult(i, test.tolist(), y[test].tolist(), preds))
        logger.info("fold %d/%d accuracy %.4f", i + 1, len(folds),
                    report.folds[-1].scores()["accuracy"])
    return report


def multi_resolution_features(samples, style, resolutions, native: int = NATIVE_SIDE):
    """Render each sample once and downscale it to every requested side."""
    style = RenderStyle(style)
    rows: dict[int, list] = {r: [] for r in resolutions}
    for s in samples:
        img = render(s, style, (native, native))
        for r in resolutions:
            rows[r].append(featurize(downscale(img, r)))
    return {r: stack_features(v) for r, v in rows.items()}


def resolution_sweep(dataset: Dataset, resolutions, kinds=REQUIRED_KINDS,
                     style=RenderStyle.CANDLE_OHLC, k: int = 5, seed: int = 0,
                     native: int = NATIVE_SIDE, hyperparameters: dict | None = None) -> list[EvalReport]:
    """One report per resolution, all on the same fold assignment."""
    resolutions = list(resolutions)
    if any(r > native for r in resolutions):
        raise EvalError(f"resolutions must be <= native side {native}")
    y = dataset.labels
    folds = stratified_kfold(y, k, seed)
    feats = multi_resolution_features(dataset.samples, style, resolutions, native)
    style = RenderStyle(style)
    return [
        run_cv(feats[r], y, kinds, k, seed, folds=folds, hyperparameters=hyperparameters,
               config={"rule": dataset.rule.value, "style": style.value, "resolution": r})
        for r in resolutions
    ]


def representation_comparison(datasets, representations=None, resolution: int = 30,
                              kinds=REQUIRED_KINDS, k: int = 5, seed: int = 0,
                              native: int = NATIVE_SIDE,
                              hyperparameters: dict | None = None) -> list[EvalReport]:
    """Cross-validate every representation on each rule's dataset with shared folds.

    ``representations`` are render style names plus ``"tabular"`` for the numeric
    baseline; defaults to all five styles and the baseline.
    """
    if representations is None:
        representations = [s.value for s in RenderStyle] + [TABULAR]
    reports = []
    for ds in datasets:
        y = ds.labels
        folds = stratified_kfold(y, k, seed)
        for rep in representations:
            X = dataset_features(ds.samples, rep, resolution, native)
            reports.append(run_cv(
                X, y, kinds, k, seed, folds=folds, hyperparameters=hyperparameters,
                config={"rule": ds.rule.value, "style": rep,
                        "resolution": None if rep == TABULAR else resolution}))
    return reports


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_results_csv(reports, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for rep in reports:
            c = rep.config
            res = "" if c.get("resolution") is None else c["resolution"]
            for name in rep.classifiers:
                for f in rep.folds:
                    s = f.scores(name)
                    w.writerow([c.get("rule", ""), c.get("style", ""), res, name, f.fold,
                                _fmt(s["accuracy"]), _fmt(s["precision"])])
    return path


def write_aggregate_json(reports, path, run_config: dict | None = None,
                         run_fingerprint: str | None = None) -> Path:
    path = Path(path)
    doc = {"run_config": run_config or {}, "reports": [r.summary() for r in reports]}
    if run_fingerprint is not None:
        doc["run_fingerprint"] = run_fingerprint
    elif run_config is not None:
        doc["run_fingerprint"] = fingerprint(run_config)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def write_predictions_json(reports, path) -> Path:
    """Per-fold indices, truths and member predictions; enough to recompute every metric."""
    path = Path(path)
    doc = [{"config": r.config, "folds": [asdict(f) for f in r.folds]} for r in reports]
    path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_predictions_json(path) -> list[EvalReport]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [EvalReport(d["config"], [FoldResult(**f) for f in d["folds"]]) for d in doc]

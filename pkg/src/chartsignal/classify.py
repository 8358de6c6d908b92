"""Featurization, the classifier registry, and hard-voting ensembles."""

from __future__ import annotations

import base64
import enum
import hashlib
import json
import pickle
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .market_data import window_bars
from .raster import NATIVE_SIDE, RenderStyle, render
from .resample import downscale

MODEL_FORMAT_VERSION = 1


class ClassifierKind(str, enum.Enum):
    LOGISTIC_REGRESSION = "LogisticRegression"
    GAUSSIAN_NAIVE_BAYES = "GaussianNaiveBayes"
    K_NEAREST_NEIGHBORS = "KNearestNeighbors"
    DECISION_TREE = "DecisionTree"
    RANDOM_FOREST = "RandomForest"
    MLP = "Mlp"
    EXTRA_TREES = "ExtraTrees"
    ADA_BOOST = "AdaBoost"
    BAGGING = "Bagging"
    GRADIENT_BOOSTING = "GradientBoosting"
    LINEAR_SVM = "LinearSvm"
    RBF_SVM = "RbfSvm"
    LDA = "Lda"
    QDA = "Qda"
    GAUSSIAN_PROCESS = "GaussianProcess"
    CNN = "Cnn"


REQUIRED_KINDS = (
    ClassifierKind.LOGISTIC_REGRESSION,
    ClassifierKind.GAUSSIAN_NAIVE_BAYES,
    ClassifierKind.K_NEAREST_NEIGHBORS,
    ClassifierKind.DECISION_TREE,
    ClassifierKind.RANDOM_FOREST,
    ClassifierKind.MLP,
)
OPTIONAL_KINDS = tuple(k for k in ClassifierKind if k not in REQUIRED_KINDS)


class FeatureMode(str, enum.Enum):
    IMAGE = "image"
    TABULAR = "tabular"


class ClassifyError(ValueError):
    pass


# ---------------------------------------------------------------- features

def tabular_features(window) -> np.ndarray:
    """Day-major (open, high, low, close) values z-scored within the window."""
    bars = window_bars(window)
    x = np.stack([bars.open, bars.high, bars.low, bars.close], axis=1).ravel()
    sd = x.std()
    if sd == 0:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def featurize(sample, mode: FeatureMode | str = FeatureMode.IMAGE) -> np.ndarray:
    """Flatten a RasterImage (image mode) or a WindowSample (tabular mode)."""
    mode = FeatureMode(mode)
    if mode is FeatureMode.IMAGE:
        return np.asarray(sample.pixels, dtype=np.float64).ravel()
    return tabular_features(sample)


def stack_features(vectors) -> np.ndarray:
    vectors = list(vectors)
    lengths = {len(v) for v in vectors}
    if len(lengths) > 1:
        raise ClassifyError(f"mixed feature lengths in one dataset: {sorted(lengths)}")
    return np.vstack(vectors)


def image_features(samples, style: RenderStyle | str, side: int,
                   native: int = NATIVE_SIDE) -> np.ndarray:
    """Render each window, downscale to ``side`` and flatten (row-major)."""
    style = RenderStyle(style)
    return stack_features(
        featurize(downscale(render(s, style, (native, native)), side)) for s in samples)


def dataset_features(samples, representation: str, side: int, native: int = NATIVE_SIDE):
    """Features for a render style name, or ``"tabular"`` for the numeric baseline."""
    if representation == FeatureMode.TABULAR.value:
        return stack_features(tabular_features(s) for s in samples)
    return image_features(samples, representation, side, native)


# ---------------------------------------------------------------- estimators

class GaussianNaiveBayes:
    """Per-class independent Gaussians with variances floored at ``var_floor``."""

    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.theta_ = np.array([X[y == c].mean(axis=0) for c in self.classes_])
        self.var_ = np.maximum(np.array([X[y == c].var(axis=0) for c in self.classes_]),
                               self.var_floor)
        self.class_log_prior_ = np.log(np.array([(y == c).mean() for c in self.classes_]))
        return self

    def _joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = []
        for i in range(len(self.classes_)):
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[i]))
            ll = ll - 0.5 * np.sum((X - self.theta_[i]) ** 2 / self.var_[i], axis=1)
            out.append(self.class_log_prior_[i] + ll)
        return np.stack(out, axis=1)

    def predict_proba(self, X):
        jll = self._joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)


class TorchCnn:
    """Three 3x3x32 conv layers with ReLU and 2x2 max pooling between them, sigmoid head."""

    def __init__(self, epochs: int = 50, batch_size: int = 16, lr: float = 1e-3, seed: int = 0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed

    def _net(self, side):
        import torch.nn as nn

        s = side // 2 // 2
        return nn.Sequential(
            nn.Conv2d(1, 32, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(32, 32, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(32, 32, 3, padding=1), nn.ReLU(),
            nn.Flatten(), nn.Linear(32 * s * s, 1),
        )

    def fit(self, X, y):
        import torch

        X = np.asarray(X, dtype=np.float32)
        self.side_ = int(round(np.sqrt(X.shape[1])))
        if self.side_ ** 2 != X.shape[1] or self.side_ < 4:
            raise ClassifyError("Cnn needs square image features with side >= 4")
        torch.manual_seed(self.seed)
        gen = torch.Generator().manual_seed(self.seed)
        net = self._net(self.side_)
        opt = torch.optim.Adam(net.parameters(), lr=self.lr)
        loss_fn = torch.nn.BCEWithLogitsLoss()
        xt = torch.from_numpy(X).reshape(-1, 1, self.side_, self.side_)
        yt = torch.from_numpy(np.asarray(y, dtype=np.float32)).reshape(-1, 1)
        net.train()
        for _ in range(self.epochs):
            perm = torch.randperm(len(xt), generator=gen)
            for i in range(0, len(xt), self.batch_size):
                b = perm[i:i + self.batch_size]
                opt.zero_grad()
                loss_fn(net(xt[b]), yt[b]).backward()
                opt.step()
        self.state_ = {k: v.detach().numpy().copy() for k, v in net.state_dict().items()}
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        import torch

        net = self._net(self.side_)
        net.load_state_dict({k: torch.from_numpy(v) for k, v in self.state_.items()})
        net.eval()
        xt = torch.from_numpy(np.asarray(X, dtype=np.float32)).reshape(-1, 1, self.side_, self.side_)
        with torch.no_grad():
            p = torch.sigmoid(net(xt)).numpy().ravel().astype(np.float64)
        return np.stack([1 - p, p], axis=1)


DEFAULT_HYPERPARAMETERS: dict[ClassifierKind, dict] = {
    ClassifierKind.LOGISTIC_REGRESSION: {"C": 1.0, "tol": 1e-6, "max_iter": 1000},
    ClassifierKind.GAUSSIAN_NAIVE_BAYES: {"var_floor": 1e-9},
    ClassifierKind.K_NEAREST_NEIGHBORS: {"n_neighbors": 5},
    ClassifierKind.DECISION_TREE: {"criterion": "gini", "max_depth": None, "min_samples_leaf": 1},
    ClassifierKind.RANDOM_FOREST: {"n_estimators": 100, "max_features": "sqrt", "bootstrap": True},
    ClassifierKind.MLP: {"hidden_layer_sizes": [32, 32, 32], "learning_rate_init": 1e-3,
                         "beta_1": 0.9, "beta_2": 0.999, "batch_size": 16, "max_iter": 50,
                         "alpha": 0.0},
    ClassifierKind.EXTRA_TREES: {"n_estimators": 100},
    ClassifierKind.ADA_BOOST: {"n_estimators": 50},
    ClassifierKind.BAGGING: {"n_estimators": 10},
    ClassifierKind.GRADIENT_BOOSTING: {"n_estimators": 100},
    ClassifierKind.LINEAR_SVM: {"C": 0.025},
    ClassifierKind.RBF_SVM: {"C": 1.0, "gamma": "scale"},
    ClassifierKind.LDA: {},
    ClassifierKind.QDA: {"reg_param": 0.1},
    ClassifierKind.GAUSSIAN_PROCESS: {},
    ClassifierKind.CNN: {"epochs": 50, "batch_size": 16, "lr": 1e-3},
}


def _build_estimator(kind: ClassifierKind, seed: int, hp: dict):
    from sklearn import discriminant_analysis as da
    from sklearn import ensemble, gaussian_process, linear_model, neighbors, neural_network, svm, tree

    rs = seed % (2 ** 32)
    K = ClassifierKind
    if kind is K.LOGISTIC_REGRESSION:
        return linear_model.LogisticRegression(solver="lbfgs", random_state=rs, **hp)
    if kind is K.GAUSSIAN_NAIVE_BAYES:
        return GaussianNaiveBayes(**hp)
    if kind is K.K_NEAREST_NEIGHBORS:
        return neighbors.KNeighborsClassifier(metric="euclidean", **hp)
    if kind is K.DECISION_TREE:
        return tree.DecisionTreeClassifier(random_state=rs, **hp)
    if kind is K.RANDOM_FOREST:
        return ensemble.RandomForestClassifier(random_state=rs, n_jobs=1, **hp)
    if kind is K.MLP:
        hp = dict(hp)
        hp["hidden_layer_sizes"] = tuple(hp["hidden_layer_sizes"])
        return neural_network.MLPClassifier(activation="relu", solver="adam", shuffle=True,
                                            random_state=rs, n_iter_no_change=hp["max_iter"] + 1,
                                            **hp)
    if kind is K.EXTRA_TREES:
        return ensemble.ExtraTreesClassifier(random_state=rs, **hp)
    if kind is K.ADA_BOOST:
        return ensemble.AdaBoostClassifier(random_state=rs, **hp)
    if kind is K.BAGGING:
        return ensemble.BaggingClassifier(random_state=rs, **hp)
    if kind is K.GRADIENT_BOOSTING:
        return ensemble.GradientBoostingClassifier(random_state=rs, **hp)
    if kind is K.LINEAR_SVM:
        return svm.SVC(kernel="linear", probability=True, random_state=rs, **hp)
    if kind is K.RBF_SVM:
        return svm.SVC(kernel="rbf", probability=True, random_state=rs, **hp)
    if kind is K.LDA:
        return da.LinearDiscriminantAnalysis(**hp)
    if kind is K.QDA:
        return da.QuadraticDiscriminantAnalysis(**hp)
    if kind is K.GAUSSIAN_PROCESS:
        return gaussian_process.GaussianProcessClassifier(random_state=rs, **hp)
    if kind is K.CNN:
        return TorchCnn(seed=rs, **hp)
    raise ClassifyError(f"unknown classifier kind {kind!r}")


def member_seed(seed: int, kind: ClassifierKind | str) -> int:
    digest = hashlib.sha256(f"{seed}|{ClassifierKind(kind).value}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


# ---------------------------------------------------------------- models

@dataclass
class TrainedModel:
    kind: ClassifierKind
    estimator: object = field(repr=False)
    n_features: int
    seed: int
    hyperparameters: dict
    metadata: dict = field(default_factory=dict)

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ClassifyError(f"expected {self.n_features} features, got {X.shape[1]}")
        proba = self.estimator.predict_proba(X)
        col = int(np.flatnonzero(np.asarray(self.estimator.classes_) == 1)[0])
        return np.clip(proba[:, col], 0.0, 1.0)

    def labels(self, X) -> np.ndarray:
        return (self.scores(X) >= 0.5).astype(np.int64)


def train(kind: ClassifierKind | str, X, y, seed: int = 0, hyperparameters: dict | None = None,
          metadata: dict | None = None) -> TrainedModel:
    kind = ClassifierKind(kind)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ClassifyError("X must be 2-D and aligned with y")
    counts = np.bincount(y, minlength=2)
    if len(counts) > 2 or counts[0] < 2 or counts[1] < 2:
        raise ClassifyError(f"need >= 2 samples of each class 0/1, got counts {counts.tolist()}")
    hp = dict(DEFAULT_HYPERPARAMETERS[kind])
    hp.update(hyperparameters or {})
    est = _build_estimator(kind, seed, hp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est.fit(X, y)
    return TrainedModel(kind, est, X.shape[1], seed, hp, dict(metadata or {}))


def predict(model: TrainedModel, x) -> tuple[int, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ClassifyError("predict takes a single feature vector")
    s = float(model.scores(x[None, :])[0])
    return int(s >= 0.5), s


def save_model(model: TrainedModel, path) -> Path:
    """JSON envelope with a base64 pickle of the fitted estimator."""
    path = Path(path)
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind.value,
        "seed": model.seed,
        "n_features": model.n_features,
        "hyperparameters": model.hyperparameters,
        "metadata": model.metadata,
        "parameters": base64.b64encode(pickle.dumps(model.estimator, protocol=4)).decode("ascii"),
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def load_model(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ClassifyError(f"{path}: unsupported model version {doc.get('version')!r}")
    est = pickle.loads(base64.b64decode(doc["parameters"]))
    return TrainedModel(ClassifierKind(doc["kind"]), est, doc["n_features"], doc["seed"],
                        doc["hyperparameters"], doc["metadata"])


# ---------------------------------------------------------------- voting

@dataclass
class VotingEnsemble:
    members: list[TrainedModel]
    threshold: float = 0.5

    def __post_init__(self):
        if not self.members:
            raise ClassifyError("ensemble needs at least one member")

    def vote_fractions(self, X) -> np.ndarray:
        votes = np.stack([m.labels(X) for m in self.members])
        return votes.mean(axis=0)

    def predict(self, X, threshold: float | None = None) -> np.ndarray:
        th = self.threshold if threshold is None else threshold
        return (self.vote_fractions(X) > th).astype(np.int64)


def vote(member_labels, threshold: float = 0.5) -> tuple[int, float]:
    """Majority of hard labels; a fraction equal to ``threshold`` (a tie) is no-buy."""
    labels = np.asarray(member_labels)
    if labels.size == 0:
        raise ClassifyError("no votes")
    frac = float(labels.mean())
    return int(frac > threshold), frac


def hard_vote(ensemble: VotingEnsemble, x) -> tuple[int, float]:
    x = np.asarray(x, dtype=np.float64)
    return vote([m.labels(x[None, :])[0] for m in ensemble.members], ensemble.threshold)


def train_ensemble(kinds, X, y, seed: int = 0, hyperparameters: dict | None = None,
                   metadata: dict | None = None, threshold: float = 0.5) -> VotingEnsemble:
    hyperparameters = hyperparameters or {}
    members = []
    for k in kinds:
        k = ClassifierKind(k)
        members.append(train(k, X, y, member_seed(seed, k), hyperparameters.get(k.value), metadata))
    return VotingEnsemble(members, threshold)

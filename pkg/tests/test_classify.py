import numpy as np
import pytest

from chartsignal.classify import (OPTIONAL_KINDS, REQUIRED_KINDS, ClassifierKind, ClassifyError,
                                  FeatureMode, VotingEnsemble, dataset_features, featurize,
                                  hard_vote, image_features, load_model, member_seed, predict,
                                  save_model, stack_features, tabular_features, train,
                                  train_ensemble, vote)
from chartsignal.labeler import sample_balanced_dataset
from chartsignal.market_data import generate_synthetic_corpus, generate_synthetic_series
from chartsignal.raster import RasterImage, render
from chartsignal.resample import downscale


def blobs(n=100, d=5, sep=10.0, seed=0):
    rng = np.random.default_rng(seed)
    c0, c1 = np.zeros(d), np.full(d, sep / np.sqrt(d))
    X = np.vstack([rng.normal(c0, 1.0, (n, d)), rng.normal(c1, 1.0, (n, d))])
    y = np.repeat([0, 1], n)
    return X, y, c0, c1


@pytest.fixture(scope="module")
def pixel_task():
    """Low-contrast 13x13 noise images labelled by one binary pixel."""
    rng = np.random.default_rng(6)
    X = rng.uniform(0.0, 0.1, (240, 169))
    y = np.tile([0, 1], 120)
    X[:, 84] = y
    return X, y


@pytest.fixture(scope="module")
def chart_pixel_task():
    """13x13 chart images labelled by thresholding one pixel."""
    corpus = generate_synthetic_corpus(20, 400, seed=5)
    ds = sample_balanced_dataset(corpus, "BB", per_ticker=6, seed=0)
    X = image_features(ds.samples, "CandleOhlc", 13)
    j = int(np.argmin(np.abs((X > 0.5).mean(axis=0) - 0.5)))
    y = (X[:, j] > 0.5).astype(int)
    return X, y


class TestFeaturize:
    def test_image_length(self):
        img = downscale(render(generate_synthetic_series(1, 20)), 30)
        v = featurize(img)
        assert v.shape == (900,) and v.min() >= 0 and v.max() <= 1
        np.testing.assert_array_equal(v.reshape(30, 30), img.pixels)

    def test_background_is_zero(self):
        assert not featurize(RasterImage(np.zeros((30, 30)))).any()

    def test_tabular_constant(self, series_factory):
        s = series_factory(np.full(27, 3.0))
        v = featurize(s, FeatureMode.TABULAR)
        assert v.shape == (108,) and not v.any()

    def test_tabular_layout_and_norm(self):
        s = generate_synthetic_series(2, 20)
        v = tabular_features(s)
        assert v.shape == (80,)
        assert v.mean() == pytest.approx(0, abs=1e-12) and v.std() == pytest.approx(1)
        raw = np.array([s.open[3], s.high[3], s.low[3], s.close[3]])
        assert np.argsort(v[12:16]).tolist() == np.argsort(raw).tolist()

    def test_mixed_dimensions_rejected(self):
        with pytest.raises(ClassifyError, match="mixed"):
            stack_features([np.zeros(900), np.zeros(25)])

    def test_dataset_features_modes(self):
        corpus = generate_synthetic_corpus(3, 300, seed=1)
        ds = sample_balanced_dataset(corpus, "RSI", per_ticker=2, seed=0)
        assert dataset_features(ds.samples, "tabular", 30).shape == (len(ds), 108)
        assert dataset_features(ds.samples, "CloseLine", 8).shape == (len(ds), 64)


class TestTrain:
    def test_logistic_on_blobs(self):
        X, y, _, _ = blobs()
        m = train("LogisticRegression", X, y, seed=0)
        assert (m.labels(X) == y).mean() >= 0.99

    def test_knn_pure_neighbourhoods(self):
        rng = np.random.default_rng(1)
        centers = rng.uniform(-100, 100, (10, 3))
        X = np.vstack([c + rng.normal(0, 0.1, (8, 3)) for c in centers])
        y = np.repeat(np.arange(10) % 2, 8)
        m = train("KNearestNeighbors", X, y)
        assert (m.labels(X) == y).mean() == 1.0

    def test_tree_oracle_feature(self):
        rng = np.random.default_rng(2)
        y = np.tile([0, 1], 50)
        X = np.column_stack([rng.random(100), y, rng.random(100)])
        m = train("DecisionTree", X, y, seed=3)
        assert m.estimator.get_depth() == 1
        assert (m.labels(X) == y).all()

    def test_single_class_rejected(self):
        with pytest.raises(ClassifyError):
            train("RandomForest", np.zeros((10, 3)), np.zeros(10, dtype=int))

    def test_mlp_architecture(self):
        X, y, _, _ = blobs(n=40)
        m = train("Mlp", X, y, seed=4)
        est = m.estimator
        assert est.hidden_layer_sizes == (32, 32, 32)
        assert est.batch_size == 16 and est.solver == "adam" and est.n_iter_ == 50
        assert est.out_activation_ == "logistic"

    def test_deterministic_and_byte_stable(self, tmp_path):
        X, y, _, _ = blobs(n=60)
        for kind in REQUIRED_KINDS:
            a = save_model(train(kind, X, y, seed=9), tmp_path / "a.json").read_bytes()
            b = save_model(train(kind, X, y, seed=9), tmp_path / "b.json").read_bytes()
            assert a == b, kind

    def test_model_file_round_trip(self, tmp_path):
        X, y, _, _ = blobs(n=60)
        m = train("RandomForest", X, y, seed=1, metadata={"resolution": 30})
        p = save_model(m, tmp_path / "rf.json")
        import json
        doc = json.loads(p.read_text())
        assert doc["version"] == 1 and doc["kind"] == "RandomForest"
        assert doc["hyperparameters"]["n_estimators"] == 100 and doc["seed"] == 1
        back = load_model(p)
        np.testing.assert_array_equal(back.scores(X), m.scores(X))
        doc["version"] = 99
        p.write_text(json.dumps(doc))
        with pytest.raises(ClassifyError, match="version"):
            load_model(p)

    @pytest.mark.parametrize("kind", REQUIRED_KINDS)
    def test_scores_and_labels_consistent(self, kind):
        X, y, _, _ = blobs(n=50, sep=2.0, seed=3)
        m = train(kind, X, y, seed=0)
        s = m.scores(X)
        assert ((s >= 0) & (s <= 1)).all()
        np.testing.assert_array_equal(m.labels(X), (s >= 0.5).astype(int))

    @pytest.mark.parametrize("kind", REQUIRED_KINDS)
    def test_single_pixel_sanity_floor(self, pixel_task, kind):
        X, y = pixel_task
        m = train(kind, X, y, seed=0)
        assert (m.labels(X) == y).mean() >= 0.99

    @pytest.mark.parametrize("kind", ["DecisionTree", "RandomForest", "Mlp"])
    def test_single_chart_pixel(self, chart_pixel_task, kind):
        # linear, Bayes and distance models do not isolate one pixel among chart strokes
        X, y = chart_pixel_task
        assert (train(kind, X, y, seed=0).labels(X) == y).mean() >= 0.99

    def test_member_seeds_differ(self):
        assert len({member_seed(0, k) for k in ClassifierKind}) == len(ClassifierKind)


class TestPredict:
    def test_centroid(self):
        X, y, c0, c1 = blobs()
        m = train("GaussianNaiveBayes", X, y)
        assert predict(m, c0)[0] == 0 and predict(m, c1)[0] == 1

    def test_pure(self):
        X, y, c0, _ = blobs()
        m = train("Mlp", X, y, seed=1)
        assert predict(m, c0) == predict(m, c0)

    def test_wrong_length(self):
        X, y, _, _ = blobs()
        m = train("LogisticRegression", X, y)
        with pytest.raises(ClassifyError, match="expected 5"):
            predict(m, np.zeros(4))


class TestVote:
    def test_majority(self):
        assert vote([1, 1, 0]) == (1, pytest.approx(2 / 3))

    def test_tie_is_no_buy(self):
        assert vote([1, 0]) == (0, 0.5)

    def test_unanimous(self):
        assert vote([0, 0, 0, 0]) == (0, 0.0)

    def test_empty(self):
        with pytest.raises(ClassifyError):
            vote([])
        with pytest.raises(ClassifyError):
            VotingEnsemble([])

    def test_ensemble_order_invariant(self):
        X, y, _, _ = blobs(n=60, sep=1.5, seed=7)
        ens = train_ensemble(REQUIRED_KINDS, X, y, seed=2)
        rev = VotingEnsemble(ens.members[::-1])
        np.testing.assert_array_equal(ens.predict(X), rev.predict(X))
        for x in X[:20]:
            assert hard_vote(ens, x) == hard_vote(rev, x)

    def test_hard_vote_matches_members(self):
        X, y, _, _ = blobs(n=60, sep=1.5, seed=8)
        ens = train_ensemble(REQUIRED_KINDS, X, y, seed=2)
        for x in X[:10]:
            labels = [predict(m, x)[0] for m in ens.members]
            lab, frac = hard_vote(ens, x)
            assert frac == pytest.approx(np.mean(labels))
            assert lab == int(np.sum(labels) > len(labels) / 2)

    def test_threshold_monotone(self):
        X, y, _, _ = blobs(n=60, sep=1.0, seed=9)
        ens = train_ensemble(REQUIRED_KINDS, X, y, seed=2)
        counts = [ens.predict(X, th).sum() for th in np.linspace(0, 1, 11)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("kind", [k for k in OPTIONAL_KINDS if k is not ClassifierKind.CNN])
def test_optional_registry(kind):
    X, y, _, _ = blobs(n=30, d=4, sep=6.0)
    m = train(kind, X, y, seed=0)
    s = m.scores(X)
    assert ((s >= 0) & (s <= 1)).all() and (m.labels(X) == y).mean() >= 0.9


def test_optional_cnn():
    pytest.importorskip("torch")
    rng = np.random.default_rng(0)
    y = np.repeat([0, 1], 20)
    X = rng.random((40, 64)) * 0.2
    X[y == 1, :8] += 0.8
    m = train("Cnn", X, y, seed=0, hyperparameters={"epochs": 15})
    assert (m.labels(X) == y).mean() >= 0.9
    m2 = train("Cnn", X, y, seed=0, hyperparameters={"epochs": 15})
    np.testing.assert_array_equal(m.scores(X), m2.scores(X))

import json

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from linkscrub.cli.synthetic import SyntheticConfig, generate_synthetic
from linkscrub.core.exceptions import DatasetError, FeatureVersionError, ModelFormatError
from linkscrub.features import build_feature_matrix, extract_features
from linkscrub.forest import (
    ATS,
    NON_ATS,
    ClassBalance,
    Dataset,
    ForestConfig,
    Metrics,
    balance,
    best_split,
    cross_validate,
    decompose,
    decompose_rows,
    dumps_forest,
    dumps_predictions,
    feature_importance,
    gini,
    grow_tree,
    loads_forest,
    parse_predictions,
    predict,
    predict_matrix,
    stratified_folds,
    train,
)
from linkscrub.graph import page_graphs
from linkscrub.labels import Label
from tests.conftest import acceptance_scale

NAMES = ["noise", "signal", "constant"]


def separable(n=40, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    y = np.array([ATS, NON_ATS] * (n // 2), dtype=np.int8)
    X = np.column_stack([rng.random(n), y * 10.0 + rng.random(n), np.ones(n)])
    return Dataset(feature_names=NAMES, X=X, y=y)


def stump_config(**overrides) -> ForestConfig:
    settings = dict(tree_count=1, max_depth=1, bootstrap=False, features_per_split="all", class_balance="none")
    return ForestConfig(**{**settings, **overrides})


@pytest.fixture(scope="module")
def corpus_dataset(small_corpus):
    matrix = build_feature_matrix(page_graphs(small_corpus.traces))
    return matrix, Dataset.from_matrix(matrix, small_corpus.labels)


def test_gini():
    assert gini(np.array([0.0, 5.0, 2.0]), np.array([4.0, 10.0, 4.0])).tolist() == [0.0, 0.5, 0.5]


def test_best_split_separates():
    impurity, threshold = best_split(np.array([1.0, 2.0, 10.0, 11.0]), np.array([0, 0, 1, 1]))

    assert impurity == 0.0
    assert threshold == 6.0


def test_best_split_on_constant_feature():
    assert best_split(np.ones(4), np.array([0, 1, 0, 1])) is None


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=2, max_size=30), st.randoms())
def test_best_split_threshold_separates_distinct_values(values, random):
    x = np.array(values)
    y = np.array([random.randint(0, 1) for _ in values])
    split = best_split(x, y)

    if len(set(values)) == 1:
        assert split is None
    else:
        _, threshold = split
        assert x.min() <= threshold < x.max()


def test_stump_splits_on_the_signal():
    tree = grow_tree(separable().X, separable().y, stump_config(), np.random.default_rng(0))

    assert tree.node_count == 3
    assert NAMES[tree.feature[0]] == "signal"
    assert tree.depth() == 1


def test_tree_contributions_add_up():
    dataset = separable()
    tree = grow_tree(dataset.X, dataset.y, ForestConfig(max_depth=3), np.random.default_rng(1))
    prior, contributions = tree.contributions(dataset.X)

    assert np.allclose(prior + contributions.sum(axis=1), tree.predict_proba(dataset.X), atol=1e-12)


def test_forest_learns_separable_data():
    dataset = separable()
    forest = train(dataset, ForestConfig(tree_count=15, seed=3))

    assert [forest.label_for(score) for score in forest.scores(dataset.X)] == [
        Label.ATS if label == ATS else Label.NON_ATS for label in dataset.y
    ]


def test_training_is_deterministic():
    dataset = separable()
    cfg = ForestConfig(tree_count=5, seed=9)

    assert dumps_forest(train(dataset, cfg)) == dumps_forest(train(dataset, cfg))


def test_threads_do_not_change_the_forest():
    dataset = separable()

    assert dumps_forest(train(dataset, ForestConfig(tree_count=6, seed=2, n_jobs=3))) == dumps_forest(
        train(dataset, ForestConfig(tree_count=6, seed=2))
    )


def test_features_per_split():
    assert ForestConfig().features_for(72) == 9
    assert ForestConfig(features_per_split="log2").features_for(72) == 7
    assert ForestConfig(features_per_split="all").features_for(72) == 72
    assert ForestConfig(features_per_split=100).features_for(72) == 72

    with pytest.raises(ValueError):
        ForestConfig(features_per_split="half")


def test_balance_downsamples_majority():
    y = np.array([ATS] * 3 + [NON_ATS] * 9, dtype=np.int8)
    dataset = Dataset(feature_names=["x"], X=np.arange(12, dtype=float).reshape(12, 1), y=y)
    balanced = balance(dataset, seed=4)

    assert (balanced.ats_count, balanced.non_ats_count) == (3, 3)
    assert list(balanced.X[:3, 0]) == [0.0, 1.0, 2.0]
    assert np.all(np.diff(balanced.X[:, 0]) > 0)

    with pytest.raises(DatasetError):
        balance(dataset.subset(np.arange(3)))


def test_dataset_rejects_non_finite_values():
    with pytest.raises(DatasetError):
        Dataset(feature_names=["x"], X=np.array([[np.nan]]), y=np.array([ATS]))


def test_stratified_folds():
    y = np.array([ATS] * 7 + [NON_ATS] * 13)
    folds = stratified_folds(y, 5, seed=1)

    assert sorted(np.concatenate(folds).tolist()) == list(range(20))
    assert max(map(len, folds)) - min(map(len, folds)) <= 1
    assert all(1 <= np.sum(y[fold] == ATS) <= 2 for fold in folds)

    with pytest.raises(DatasetError):
        stratified_folds(y, 1)
    with pytest.raises(DatasetError):
        stratified_folds(y, 8)


def test_metrics_from_counts():
    metrics = Metrics.from_counts(tp=8, fp=2, tn=9, fn=1)

    assert metrics.accuracy == pytest.approx(17 / 20)
    assert metrics.precision == pytest.approx(0.8)
    assert metrics.recall == pytest.approx(8 / 9)
    assert Metrics.from_counts(tp=0, fp=0, tn=5, fn=0).precision == 0.0


def test_cross_validation_on_separable_data():
    report = cross_validate(separable(60), k=5, cfg=ForestConfig(tree_count=10))

    assert report.metrics.accuracy == 1.0
    assert len(report.folds) == 5
    assert sum(fold.total for fold in report.folds) == 60
    assert "5-fold cross validation" in report.render()


def test_importance_of_a_stump():
    dataset = separable()
    forest = train(dataset, stump_config())
    ranking = feature_importance(forest, dataset)

    assert ranking[0].feature == "signal"
    assert ranking[0].percent == 100.0
    assert [item.percent for item in ranking[1:]] == [0.0, 0.0]


def test_features_that_never_split_do_not_change_predictions():
    dataset = separable()
    cfg = ForestConfig(tree_count=3, bootstrap=False, features_per_split="all")
    without_constant = dataset.select(["noise", "signal"])

    assert np.array_equal(
        train(dataset, cfg).scores(dataset.X),
        train(without_constant, cfg).scores(without_constant.X),
    )


def test_importance_of_ats_predictions_only():
    dataset = separable()
    ranking = feature_importance(train(dataset, stump_config()), dataset, label=Label.ATS)

    assert ranking[0].percent == 100.0


def test_decomposition_adds_up_to_the_score():
    dataset = separable(80, seed=5)
    forest = train(dataset, ForestConfig(tree_count=20, seed=5))
    prior, contributions = decompose_rows(forest, dataset.X)

    assert np.allclose(prior + contributions.sum(axis=1), forest.scores(dataset.X), atol=1e-9)

    single_prior, single = decompose(forest, dataset.X[0])
    assert single_prior + single.sum() == pytest.approx(forest.scores(dataset.X[:1])[0], abs=1e-9)


def test_forest_persistence():
    forest = train(separable(), ForestConfig(tree_count=4, seed=1))
    text = dumps_forest(forest)
    loaded = loads_forest(text)

    assert dumps_forest(loaded) == text
    assert np.array_equal(loaded.scores(separable().X), forest.scores(separable().X))


@pytest.mark.parametrize(
    "corrupt",
    [
        lambda data: "not json",
        lambda data: json.dumps({**data, "format": 9}),
        lambda data: json.dumps({**data, "trees": []}),
        lambda data: json.dumps({key: value for key, value in data.items() if key != "feature_names"}),
        lambda data: json.dumps({**data, "trees": [{**data["trees"][0], "left": [5, -1, -1]}]}),
        lambda data: json.dumps({**data, "trees": [{**data["trees"][0], "feature": [7, -1, -1]}]}),
        lambda data: json.dumps({**data, "config": {**data["config"], "tree_count": 0}}),
    ],
)
def test_corrupt_forest_files(corrupt):
    data = json.loads(dumps_forest(train(separable(), stump_config())))

    with pytest.raises(ModelFormatError):
        loads_forest(corrupt(data))


def test_predict_checks_the_feature_version(corpus_dataset, sync_graph):
    matrix, dataset = corpus_dataset
    forest = train(dataset, ForestConfig(tree_count=5))
    vector = build_feature_matrix([sync_graph])

    with pytest.raises(FeatureVersionError):
        predict_matrix(forest, vector.copy(update={"version": "0"}))

    prediction = predict(forest, extract_features(sync_graph, "decoration|r1|query|0"))
    assert 0.0 <= prediction.score <= 1.0


def test_predictions_text_round_trip(corpus_dataset):
    matrix, dataset = corpus_dataset
    predictions = predict_matrix(train(dataset, ForestConfig(tree_count=5)), matrix)

    assert len(predictions) == len(matrix)
    assert parse_predictions(dumps_predictions(predictions)) == predictions


def test_cross_validation_on_the_corpus(corpus_dataset):
    _, dataset = corpus_dataset
    report = cross_validate(dataset, k=3, cfg=ForestConfig(tree_count=10))

    assert report.metrics.total == len(dataset)
    assert set(report.per_kind) <= {row.kind for row in dataset.rows}
    assert report.metrics.accuracy >= 0.8


@pytest.mark.slow
def test_planted_corpus_reaches_target_accuracy():
    corpus = generate_synthetic(SyntheticConfig(sites=max(20, int(400 * acceptance_scale())), seed=1))
    matrix = build_feature_matrix(page_graphs(corpus.traces))
    dataset = Dataset.from_matrix(matrix, corpus.labels)
    cfg = ForestConfig(tree_count=50, class_balance=ClassBalance.DOWNSAMPLE)

    report = cross_validate(dataset, k=10, cfg=cfg)
    assert report.metrics.accuracy >= 0.95
    assert report.metrics.precision >= 0.93
    assert report.metrics.recall >= 0.95

    control = cross_validate(balance(dataset).shuffled_labels(seed=2), k=10, cfg=cfg)
    assert abs(control.metrics.accuracy - 0.5) <= (0.05 if acceptance_scale() >= 1 else 0.1)


@pytest.mark.slow
def test_decomposition_at_scale(corpus_dataset):
    _, dataset = corpus_dataset
    forest = train(dataset, ForestConfig(tree_count=100))
    X = np.resize(dataset.X, (1000, dataset.X.shape[1]))
    prior, contributions = decompose_rows(forest, X)

    assert np.allclose(prior + contributions.sum(axis=1), forest.scores(X), atol=1e-9)

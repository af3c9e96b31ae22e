"""Tree growth against brute-force split search, plus forest, boosting,
dispatch, and model serialization."""

import io
import json

import numpy as np
import pytest

from fleetrisk.errors import ModelFormatError, SingleClassLabelsError, WidthMismatchError
from fleetrisk.features import Column, FeatureMatrix
from fleetrisk.models import (
    ForestHyper,
    ForestModel,
    GbtHyper,
    GbtModel,
    LogisticHyper,
    LogisticModel,
    default_hyper,
    fit_gbt,
    fit_logistic,
    fit_model,
    fit_random_forest,
    fit_tree,
    load_model,
    model_from_dict,
    model_to_dict,
    predict_proba,
    save_model,
)
from fleetrisk.models.tree import ZERO_REDUCTION


def matrix_from(X, y, standardized=False):
    cols = [Column(name=f"x{j}", kind="numeric") for j in range(X.shape[1])]
    return FeatureMatrix(
        columns=cols,
        values=np.asarray(X, dtype=np.float64),
        labels=np.asarray(y),
        scale=np.ones(X.shape[1]),
        standardized=standardized,
    )


def brute_force_root_split(X, y, min_leaf):
    """O(n^2) scan over every feature and midpoint, same tie rules."""
    n, p = X.shape
    total_sse = ((y - y.mean()) ** 2).sum()
    best = (ZERO_REDUCTION, -1, 0.0)
    for f in range(p):
        levels = np.unique(X[:, f])
        for lo, hi in zip(levels[:-1], levels[1:]):
            t = 0.5 * (lo + hi)
            mask = X[:, f] <= t
            nl, nr = mask.sum(), (~mask).sum()
            if nl < min_leaf or nr < min_leaf:
                continue
            sse = ((y[mask] - y[mask].mean()) ** 2).sum() + ((y[~mask] - y[~mask].mean()) ** 2).sum()
            gain = total_sse - sse
            if gain > best[0] + 1e-9 * max(1.0, abs(best[0])):
                best = (gain, f, t)
    return best[1], best[2]


def leaf_assignment(tree, X):
    idx = np.zeros(X.shape[0], dtype=np.int32)
    active = tree.feature[idx] >= 0
    while np.any(active):
        rows = np.nonzero(active)[0]
        nodes = idx[rows]
        go_left = X[rows, tree.feature[nodes]] <= tree.threshold[nodes]
        idx[rows] = np.where(go_left, tree.left[nodes], tree.right[nodes])
        active = tree.feature[idx] >= 0
    return idx


def test_perfectly_separable_split():
    X = np.array([[0.0], [1.0], [2.0], [3.0], [10.0], [11.0], [12.0], [13.0]])
    y = np.array([0.0, 0, 0, 0, 1, 1, 1, 1])
    tree = fit_tree(X, y, max_depth=1, min_leaf=1)
    assert tree.feature[0] == 0
    assert tree.threshold[0] == 6.5
    np.testing.assert_array_equal(tree.predict(X), y)


def test_root_split_matches_brute_force():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = rng.random((60, 3))
        y = rng.random(60) + (X[:, seed % 3] > 0.5)
        tree = fit_tree(X, y, max_depth=1, min_leaf=5)
        f, t = brute_force_root_split(X, y, min_leaf=5)
        assert tree.feature[0] == f, f"seed {seed}"
        assert tree.threshold[0] == pytest.approx(t, abs=1e-12), f"seed {seed}"


def test_leaves_predict_training_means():
    rng = np.random.default_rng(42)
    X = rng.random((200, 4))
    y = rng.random(200)
    tree = fit_tree(X, y, max_depth=4, min_leaf=5)
    leaves = leaf_assignment(tree, X)
    preds = tree.predict(X)
    for leaf in np.unique(leaves):
        mask = leaves == leaf
        assert preds[mask][0] == pytest.approx(y[mask].mean(), abs=1e-12)


def test_min_leaf_respected():
    rng = np.random.default_rng(7)
    X = rng.random((120, 2))
    y = rng.random(120)
    tree = fit_tree(X, y, max_depth=12, min_leaf=9)
    counts = np.bincount(leaf_assignment(tree, X), minlength=tree.n_nodes)
    leaf_nodes = tree.feature == -1
    assert np.all(counts[leaf_nodes] >= 9)


def test_depth_zero_is_global_mean():
    rng = np.random.default_rng(1)
    X = rng.random((30, 2))
    y = rng.random(30)
    tree = fit_tree(X, y, max_depth=0)
    assert tree.n_nodes == 1
    np.testing.assert_allclose(tree.predict(X), y.mean())


def test_constant_target_never_splits():
    rng = np.random.default_rng(2)
    X = rng.random((40, 3))
    tree = fit_tree(X, np.full(40, 0.7), max_depth=5, min_leaf=1)
    assert tree.n_nodes == 1
    np.testing.assert_allclose(tree.predict(X), 0.7)


def test_split_tie_prefers_lower_feature_index():
    col = np.array([0.0, 0, 1, 1, 2, 2, 3, 3])
    X = np.column_stack([col, col])
    y = np.array([0.0, 0, 0, 0, 1, 1, 1, 1])
    tree = fit_tree(X, y, max_depth=1, min_leaf=1)
    assert tree.feature[0] == 0


def test_deeper_trees_fit_no_worse():
    rng = np.random.default_rng(3)
    X = rng.random((300, 3))
    y = np.sin(6 * X[:, 0]) + 0.3 * rng.standard_normal(300)
    sse = []
    for depth in (0, 1, 3, 6):
        tree = fit_tree(X, y, max_depth=depth, min_leaf=5)
        sse.append(((tree.predict(X) - y) ** 2).sum())
    assert sse == sorted(sse, reverse=True) or all(
        later <= earlier + 1e-9 for earlier, later in zip(sse, sse[1:])
    )


def test_feature_subsampling_is_deterministic():
    rng_data = np.random.default_rng(4)
    X = rng_data.random((80, 6))
    y = rng_data.random(80)
    t1 = fit_tree(X, y, max_depth=4, min_leaf=5, max_features=2, rng=np.random.default_rng(11))
    t2 = fit_tree(X, y, max_depth=4, min_leaf=5, max_features=2, rng=np.random.default_rng(11))
    np.testing.assert_array_equal(t1.feature, t2.feature)
    np.testing.assert_array_equal(t1.threshold, t2.threshold)


def forest_training_matrix(n=300, seed=5):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 4))
    y = (rng.random(n) < 0.2 + 0.6 * (X[:, 0] > 0.5)).astype(np.int8)
    return matrix_from(X, y)


def test_forest_deterministic_and_bounded():
    m = forest_training_matrix()
    f1 = fit_random_forest(m, ForestHyper(n_estimators=20, seed=9))
    f2 = fit_random_forest(m, ForestHyper(n_estimators=20, seed=9))
    p1 = f1.predict_proba(m.values)
    np.testing.assert_array_equal(p1, f2.predict_proba(m.values))
    assert np.all((p1 >= 0) & (p1 <= 1))


def test_forest_seed_changes_trees():
    m = forest_training_matrix()
    f1 = fit_random_forest(m, ForestHyper(n_estimators=10, seed=0))
    f2 = fit_random_forest(m, ForestHyper(n_estimators=10, seed=1))
    assert not np.array_equal(f1.predict_proba(m.values), f2.predict_proba(m.values))


def test_forest_separates_classes_on_train():
    m = forest_training_matrix()
    f = fit_random_forest(m, ForestHyper(n_estimators=30, seed=2))
    p = f.predict_proba(m.values)
    y = np.asarray(m.labels)
    assert p[y == 1].mean() > p[y == 0].mean()


def test_forest_single_class_rejected():
    rng = np.random.default_rng(0)
    m = matrix_from(rng.random((20, 2)), np.zeros(20, dtype=np.int8))
    with pytest.raises(SingleClassLabelsError):
        fit_random_forest(m, ForestHyper(n_estimators=2))


def test_forest_hyper_validation():
    with pytest.raises(ValueError):
        ForestHyper(n_estimators=0)


def test_gbt_zero_rounds_is_base_rate():
    m = forest_training_matrix()
    g = fit_gbt(m, GbtHyper(n_estimators=0))
    y = np.asarray(m.labels, dtype=np.float64)
    np.testing.assert_allclose(g.predict_proba(m.values), y.mean(), atol=1e-12)


def test_gbt_more_rounds_lower_train_loss():
    m = forest_training_matrix()
    y = np.asarray(m.labels, dtype=np.float64)

    def nll(model):
        p = model.predict_proba(m.values)
        return -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))

    losses = [nll(fit_gbt(m, GbtHyper(n_estimators=k))) for k in (0, 10, 50)]
    assert losses[0] > losses[1] > losses[2]


def test_gbt_deterministic():
    m = forest_training_matrix()
    g1 = fit_gbt(m, GbtHyper(n_estimators=15))
    g2 = fit_gbt(m, GbtHyper(n_estimators=15))
    np.testing.assert_array_equal(g1.predict_proba(m.values), g2.predict_proba(m.values))


def test_gbt_hyper_validation():
    with pytest.raises(ValueError):
        GbtHyper(learning_rate=0.0)
    with pytest.raises(ValueError):
        GbtHyper(learning_rate=1.5)
    with pytest.raises(ValueError):
        GbtHyper(n_estimators=-1)


def test_fit_model_dispatch():
    m = forest_training_matrix()
    assert isinstance(fit_model("logistic", m), LogisticModel)
    assert isinstance(fit_model("forest", m, ForestHyper(n_estimators=2)), ForestModel)
    assert isinstance(fit_model("gbt", m, GbtHyper(n_estimators=2)), GbtModel)
    with pytest.raises(ValueError):
        fit_model("svm", m)
    with pytest.raises(ValueError):
        default_hyper("svm")
    assert isinstance(default_hyper("logistic"), LogisticHyper)


def test_predict_proba_checks_width():
    m = forest_training_matrix()
    model = fit_model("logistic", m)
    with pytest.raises(WidthMismatchError):
        predict_proba(model, m.values[:, :2])
    p = predict_proba(model, m.values)
    assert p.shape == (m.n_rows,)


@pytest.mark.parametrize("kind,hyper", [
    ("logistic", LogisticHyper(max_iters=100)),
    ("forest", ForestHyper(n_estimators=5, seed=3)),
    ("gbt", GbtHyper(n_estimators=5)),
])
def test_serialization_round_trip(kind, hyper):
    m = forest_training_matrix(n=150, seed=8)
    model = fit_model(kind, m, hyper)
    buf = io.StringIO()
    save_model(model, buf)
    buf.seek(0)
    back = load_model(buf)
    assert back.kind == kind
    assert back.columns == model.columns
    np.testing.assert_array_equal(back.scale, model.scale)
    np.testing.assert_array_equal(back.predict_proba(m.values), model.predict_proba(m.values))


def test_serialization_round_trip_via_path(tmp_path):
    m = forest_training_matrix(n=100, seed=10)
    model = fit_model("gbt", m, GbtHyper(n_estimators=3))
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.predict_proba(m.values), model.predict_proba(m.values))


def test_load_rejects_malformed_payloads(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    with pytest.raises(ModelFormatError):
        load_model(bad_json)
    with pytest.raises(ModelFormatError):
        model_from_dict({"kind": "logistic"})  # no version
    with pytest.raises(ModelFormatError):
        model_from_dict({"format_version": 99, "kind": "logistic"})
    with pytest.raises(ModelFormatError):
        model_from_dict(
            {"format_version": 1, "kind": "perceptron", "columns": [], "scale": [], "standardized": False}
        )
    m = forest_training_matrix(n=80, seed=11)
    payload = model_to_dict(fit_model("logistic", m))
    del payload["weights"]
    with pytest.raises(ModelFormatError):
        model_from_dict(payload)


def test_tree_nan_values_survive_json():
    m = forest_training_matrix(n=120, seed=12)
    model = fit_model("forest", m, ForestHyper(n_estimators=2, seed=1))
    assert any(t.n_nodes > 1 for t in model.trees)
    payload = json.loads(json.dumps(model_to_dict(model)))
    back = model_from_dict(payload)
    np.testing.assert_array_equal(back.predict_proba(m.values), model.predict_proba(m.values))

import json
import warnings

import numpy as np
import pytest

from millpdm.errors import DegenerateData, InvalidConfig, NonFiniteInput, ShapeMismatch, SvrNoConvergence, WidthMismatch
from millpdm.models import (
    FAMILIES,
    ModelConfig,
    MultiLabelModel,
    fit,
    fit_multilabel,
    load_model,
    predict_multilabel,
    save_model,
)
from millpdm.models.adaboost import weighted_median
from millpdm.models.svr import rbf_kernel, smo_solve
from millpdm.models.tree import LEAF, build_tree, fit_cart

FAST = {
    "linear": {},
    "cart": {"max_depth": 4},
    "knn": {"k": 3},
    "svr": {},
    "adaboost_r2": {"n_estimators": 5, "max_depth": 3},
    "random_forest": {"n_estimators": 5, "max_depth": 4},
    "gradient_boosting": {"n_estimators": 10},
    "regularized_boosting": {"n_estimators": 10, "max_depth": 3},
}


@pytest.fixture(scope="module")
def regression_data():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(160, 4))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] * X[:, 2] + 0.1 * rng.normal(size=160)
    return X, y


def _xor_oracle(X, y, max_depth):
    """Smallest training SSE over every depth-limited tree whose splits are
    axis-aligned midpoints, by exhaustive recursion."""

    def best(idx, depth):
        leaf = float(((y[idx] - y[idx].mean()) ** 2).sum()) if len(idx) else 0.0
        if depth == 0 or len(idx) < 2:
            return leaf
        out = leaf
        for f in range(X.shape[1]):
            vals = np.unique(X[idx, f])
            for lo, hi in zip(vals[:-1], vals[1:]):
                go = X[idx, f] <= 0.5 * (lo + hi)
                out = min(out, best(idx[go], depth - 1) + best(idx[~go], depth - 1))
        return out

    return best(np.arange(len(y)), max_depth)


class TestConfig:
    def test_defaults(self):
        c = ModelConfig.create("regularized_boosting")
        assert (c.n_estimators, c.max_depth, c.learning_rate, c.subsample, c.colsample_bytree) == (150, 6, 0.1, 0.8, 0.7)
        assert c.display_name == "XGBoost"

    @pytest.mark.parametrize(
        "overrides",
        [
            {"learning_rate": 0.0},
            {"learning_rate": 1.5},
            {"subsample": 0.0},
            {"colsample_bytree": 1.1},
            {"n_estimators": 0},
            {"k": 0},
            {"bogus": 1},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(InvalidConfig):
            ModelConfig.create("gradient_boosting", **overrides)

    def test_unknown_family(self):
        with pytest.raises(InvalidConfig):
            ModelConfig.create("xgb")

    def test_dict_round_trip(self):
        c = ModelConfig.create("svr", C=2.0)
        assert ModelConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


class TestFitContracts:
    def test_linear_exact(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 2))
        m = fit(ModelConfig.create("linear"), X, 3 * X[:, 0] - 2 * X[:, 1] + 1)
        np.testing.assert_allclose(m.coef, [3.0, -2.0], atol=1e-8)
        assert m.intercept == pytest.approx(1.0, abs=1e-8)

    def test_linear_singular_falls_back(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=30)
        X = np.column_stack([x, x])
        m = fit(ModelConfig.create("linear"), X, 2 * x)
        np.testing.assert_allclose(m.predict(X), 2 * x, atol=1e-8)
        assert m.meta["solver"] == "pseudo_inverse"

    def test_cart_depth_zero_is_mean(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("cart", max_depth=0), X, y)
        assert m.tree.n_nodes == 1
        np.testing.assert_allclose(m.predict(X), y.mean())

    def test_gradient_boosting_tiny_rate_is_mean(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("gradient_boosting", learning_rate=1e-12, n_estimators=3), X, y)
        np.testing.assert_allclose(m.predict(X), y.mean(), atol=1e-9)
        assert m.base == pytest.approx(y.mean())

    def test_cart_xor_zero_training_error(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0.0, 1.0, 1.0, 0.0])
        assert _xor_oracle(X, y, 2) == 0.0
        assert _xor_oracle(X, y, 1) == pytest.approx(1.0)
        m = fit(ModelConfig.create("cart", max_depth=2), X, y)
        np.testing.assert_array_equal(m.predict(X), y)

    def test_cart_matches_exhaustive_oracle_on_stumps(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            X = rng.integers(0, 4, size=(12, 3)).astype(float)
            y = rng.normal(size=12)
            m = fit(ModelConfig.create("cart", max_depth=1), X, y)
            sse = float(((m.predict(X) - y) ** 2).sum())
            assert sse == pytest.approx(_xor_oracle(X, y, 1), abs=1e-9)

    def test_split_tie_break_lowest_feature_then_threshold(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        tree = fit_cart(X, y, max_depth=1)
        assert tree.feature[0] == 0 and tree.threshold[0] == 1.5

    def test_knn_self_label(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("knn", k=1), X, y)
        np.testing.assert_array_equal(m.predict(X), y)

    def test_knn_all_neighbours_is_mean(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("knn", k=len(y)), X, y)
        np.testing.assert_allclose(m.predict(X[:7]), y.mean())

    def test_knn_distance_ties_go_to_lower_index(self):
        X = np.array([[1.0], [-1.0], [3.0]])
        m = fit(ModelConfig.create("knn", k=1), X, np.array([10.0, 20.0, 30.0]))
        assert m.predict(np.array([[0.0]]))[0] == 10.0

    def test_forest_single_exact_tree(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("random_forest", n_estimators=1, bootstrap=False), X, y)
        np.testing.assert_allclose(m.predict(X), y, atol=1e-12)

    def test_forest_is_mean_of_trees(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("random_forest", n_estimators=7, max_depth=5), X, y)
        np.testing.assert_allclose(m.predict(X), m.tree_predictions(X).mean(axis=0), rtol=0, atol=1e-15)
        assert m.meta["max_features"] == max(1, X.shape[1] // 3)

    def test_forest_thread_count_independent(self, regression_data):
        X, y = regression_data
        cfg = ModelConfig.create("random_forest", n_estimators=8, max_depth=6)
        assert json.dumps(fit(cfg, X, y, threads=1).to_dict()) == json.dumps(fit(cfg, X, y, threads=4).to_dict())

    def test_gradient_boosting_train_mse_non_increasing(self, regression_data):
        X, y = regression_data
        mse = fit(ModelConfig.create("gradient_boosting", n_estimators=60), X, y).meta["train_mse"]
        assert all(b <= a for a, b in zip(mse, mse[1:]))

    @pytest.mark.parametrize("depth", [1, 3, 6])
    def test_regularized_reduces_to_gradient_boosting(self, regression_data, depth):
        X, y = regression_data
        gb = fit(ModelConfig.create("gradient_boosting", n_estimators=25, max_depth=depth), X, y)
        rb = fit(
            ModelConfig.create(
                "regularized_boosting",
                n_estimators=25,
                max_depth=depth,
                subsample=1.0,
                colsample_bytree=1.0,
                reg_lambda=0.0,
                split_gamma=0.0,
                min_child_weight=0.0,
            ),
            X,
            y,
        )
        np.testing.assert_allclose(rb.predict(X), gb.predict(X), atol=1e-9)

    def test_regularized_lambda_shrinks_leaves(self, regression_data):
        X, y = regression_data
        tree0 = build_tree(X, -(y - y.mean()), max_depth=0, lam=0.0)
        tree5 = build_tree(X, -(y - y.mean()) + 1.0, max_depth=0, lam=5.0)
        assert tree0.value[0] == pytest.approx(0.0, abs=1e-12)
        assert tree5.value[0] == pytest.approx(-len(y) / (len(y) + 5.0))

    def test_adaboost_single_stage_equals_its_tree(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("adaboost_r2", n_estimators=1, max_depth=2), X, y)
        assert len(m.trees) == 1
        np.testing.assert_array_equal(m.predict(X), m.trees[0].predict(X))

    def test_adaboost_stops_on_weighted_loss(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("adaboost_r2", n_estimators=50, max_depth=1), X, y)
        if m.meta["stop_reason"] == "weighted_loss>=0.5":
            assert len(m.trees) < 50
        assert all(loss < 0.5 for loss in m.meta["stage_loss"][1:])

    def test_weighted_median(self):
        preds = np.array([[1.0], [2.0], [10.0]])
        assert weighted_median(preds, np.array([1.0, 1.0, 1.0]))[0] == 2.0
        assert weighted_median(preds, np.array([0.1, 0.1, 5.0]))[0] == 10.0


class TestSvr:
    @pytest.fixture
    def solved(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(80, 3))
        y = np.sin(X[:, 0]) + 0.2 * X[:, 1]
        C, eps = 1.0, 0.1
        coef, b, info, beta = smo_solve(X, y, C=C, epsilon=eps, tol=1e-3)
        return X, y, C, eps, coef, b, info, beta

    def test_converged(self, solved):
        info = solved[6]
        assert info["converged"] and info["kkt_gap"] <= 1e-3

    def test_box_and_equality(self, solved):
        X, y, C, eps, coef, b, info, beta = solved
        assert (beta >= 0).all() and (beta <= C).all()
        assert abs(coef.sum()) < 1e-9

    def test_kkt_conditions(self, solved):
        X, y, C, eps, coef, b, info, beta = solved
        f = rbf_kernel(X, X, info["gamma"]) @ coef + b
        r = y - f
        tol = 1e-3
        a, a_star = beta[: len(y)], beta[len(y) :]
        inside = (a == 0) & (a_star == 0)
        assert (np.abs(r[inside]) <= eps + tol).all()
        free = ((a > 0) & (a < C)) | ((a_star > 0) & (a_star < C))
        assert np.allclose(np.abs(r[free]), eps, atol=tol)
        at_bound = (a == C) | (a_star == C)
        assert (np.abs(r[at_bound]) >= eps - tol).all()

    def test_points_in_tube_have_no_slack(self):
        X = np.linspace(-1, 1, 25)[:, None]
        y = 0.03 * X[:, 0]
        m = fit(ModelConfig.create("svr", epsilon=0.1), X, y)
        assert (np.abs(m.predict(X) - y) <= 0.1 + 1e-9).all()

    def test_iteration_cap_warns(self, regression_data):
        X, y = regression_data
        with pytest.warns(SvrNoConvergence):
            m = fit(ModelConfig.create("svr", max_iter=3), X, y)
        assert not m.meta["converged"]
        assert np.isfinite(m.predict(X)).all()


class TestSurface:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_serialization_round_trip(self, tmp_path, regression_data, family):
        X, y = regression_data
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SvrNoConvergence)
            m = fit(ModelConfig.create(family, **FAST[family]), X, y)
        loaded = load_model(save_model(m, tmp_path / f"{family}.json"))
        np.testing.assert_array_equal(loaded.predict(X), m.predict(X))
        assert loaded.config == m.config

    @pytest.mark.parametrize("family", FAMILIES)
    def test_deterministic(self, regression_data, family):
        X, y = regression_data
        cfg = ModelConfig.create(family, **FAST[family])
        assert json.dumps(fit(cfg, X, y).to_dict()) == json.dumps(fit(cfg, X, y).to_dict())

    @pytest.mark.parametrize("family", FAMILIES)
    def test_width_mismatch(self, regression_data, family):
        X, y = regression_data
        m = fit(ModelConfig.create(family, **FAST[family]), X, y)
        with pytest.raises(WidthMismatch):
            m.predict(X[:, :2])

    def test_tree_invariants(self, regression_data):
        X, y = regression_data
        m = fit(ModelConfig.create("random_forest", n_estimators=5), X, y)
        for tree in m.trees:
            internal = tree.feature != LEAF
            assert (tree.feature[internal] < X.shape[1]).all()
            assert np.isfinite(tree.threshold).all() and np.isfinite(tree.value).all()

    def test_degenerate_inputs(self):
        cfg = ModelConfig.create("cart")
        with pytest.raises(DegenerateData):
            fit(cfg, np.zeros((0, 3)), np.zeros(0))
        with pytest.raises(DegenerateData):
            fit(cfg, np.zeros((3, 2)), np.zeros(4))
        with pytest.raises(NonFiniteInput):
            fit(cfg, np.array([[np.nan], [1.0]]), np.zeros(2))


class TestMultiLabel:
    @pytest.fixture
    def toy(self):
        # each flag is a single threshold rule on its own column
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 1, size=(20, 5))
        thresholds = np.array([0.3, 0.5, 0.7, 0.4, 0.6])
        Y = (X > thresholds).astype(float)
        return X, Y

    def test_separable_training_f1_is_one(self, toy):
        from millpdm.metrics import classification_metrics

        X, Y = toy
        m = fit_multilabel(ModelConfig.create("cart", max_depth=3), X, Y)
        out = classification_metrics(Y.astype(int), predict_multilabel(m, X), list(m.labels))
        assert all(v.f1 == 1.0 for v in out.values())

    def test_all_zero_flag(self, toy):
        X, Y = toy
        Y = Y.copy()
        Y[:, 4] = 0
        m = fit_multilabel(ModelConfig.create("gradient_boosting", n_estimators=5), X, Y)
        np.testing.assert_array_equal(m.scores(X)[:, 4], 0.0)
        assert predict_multilabel(m, X)[:, 4].sum() == 0

    def test_threshold_above_one(self, toy):
        X, Y = toy
        m = fit_multilabel(ModelConfig.create("cart", max_depth=3), X, Y)
        assert predict_multilabel(m, X, threshold=1.1).sum() == 0

    def test_labels_and_round_trip(self, tmp_path, toy):
        X, Y = toy
        m = fit_multilabel(ModelConfig.create("knn", k=3), X, Y)
        assert m.labels == ("TWF", "HDF", "PWF", "OSF", "RNF") and len(m.models) == 5
        loaded = load_model(save_model(m, tmp_path / "ml.json"))
        assert isinstance(loaded, MultiLabelModel)
        np.testing.assert_array_equal(loaded.scores(X), m.scores(X))

    def test_wrong_width(self, toy):
        X, Y = toy
        with pytest.raises(ShapeMismatch):
            fit_multilabel(ModelConfig.create("cart"), X, Y[:, :3])

    def test_thread_count_independent(self, toy):
        X, Y = toy
        cfg = ModelConfig.create("random_forest", n_estimators=4)
        a = fit_multilabel(cfg, X, Y, threads=1).to_dict()
        b = fit_multilabel(cfg, X, Y, threads=3).to_dict()
        assert json.dumps(a) == json.dumps(b)


def test_all_families_registered():
    assert set(FAMILIES) == {
        "linear",
        "cart",
        "knn",
        "svr",
        "adaboost_r2",
        "random_forest",
        "gradient_boosting",
        "regularized_boosting",
    }

import json

import numpy as np
import pytest

import millpdm.tuning as tuning
from millpdm.dataset import kfold
from millpdm.errors import EmptySpace, FoldError, InvalidConfig, NonFiniteInput
from millpdm.models import ModelConfig
from millpdm.tuning import REFERENCE_OPTIMUM, SearchSpace, cross_validate, grid_search, random_search


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(120, 3)) * [1.0, 10.0, 100.0] + [0.0, 5.0, -50.0]
    y = X[:, 0] + 0.1 * X[:, 1] + 0.2 * rng.normal(size=120)
    return X, y


@pytest.fixture(scope="module")
def plan():
    return kfold(120, 5, seed=1)


class TestCrossValidate:
    def test_fold_count_and_mean(self, data, plan):
        X, y = data
        score = cross_validate(ModelConfig.create("linear"), X, y, plan)
        assert len(score.fold_rmse) == 5
        assert abs(np.mean(score.fold_rmse) - score.mean) <= 1e-12
        assert score.std == pytest.approx(np.std(score.fold_rmse))

    @pytest.mark.parametrize("family", ["gradient_boosting", "regularized_boosting", "cart", "random_forest"])
    def test_constant_target_gives_zero_rmse(self, data, plan, family):
        X, _ = data
        score = cross_validate(ModelConfig.create(family, n_estimators=5), X, np.full(120, 2.5), plan)
        assert score.fold_rmse == [0.0] * 5

    def test_standardizer_sees_training_rows_only(self, data, plan, monkeypatch):
        X, y = data
        seen = []
        real = tuning.fit_standardizer

        def spy(d, rows=None):
            seen.append(np.asarray(rows))
            return real(d, rows)

        monkeypatch.setattr(tuning, "fit_standardizer", spy)
        cross_validate(ModelConfig.create("knn"), X, y, plan)
        assert len(seen) == plan.k
        for i, rows in enumerate(seen):
            np.testing.assert_array_equal(rows, plan.train_rows(i))
            assert not set(rows) & set(plan.test_rows(i))

    def test_fold_error_carries_index(self, data, plan):
        X, y = data
        X = X.copy()
        X[7, 1] = np.nan
        with pytest.raises(FoldError) as info:
            cross_validate(ModelConfig.create("linear"), X, y, plan)
        assert info.value.fold == 0 if plan.assignments[7] != 0 else 1
        assert isinstance(info.value.cause, NonFiniteInput)

    def test_deterministic_and_thread_independent(self, data, plan):
        X, y = data
        cfg = ModelConfig.create("random_forest", n_estimators=5)
        assert cross_validate(cfg, X, y, plan) == cross_validate(cfg, X, y, plan, threads=3)


class TestSearch:
    def test_one_point_grid(self, data, plan):
        X, y = data
        space = SearchSpace("gradient_boosting", {"max_depth": [2]}, {"n_estimators": 5})
        result = grid_search(space, X, y, plan)
        assert result.best_params == {"max_depth": 2}
        assert result.best_config.n_estimators == 5

    def test_grid_is_full_product_and_best_is_argmin(self, data, plan):
        X, y = data
        space = SearchSpace("gradient_boosting", {"max_depth": [1, 2, 3], "learning_rate": [0.1, 0.5]}, {"n_estimators": 5})
        result = grid_search(space, X, y, plan)
        assert len(result.params) == 6
        assert result.fold_rmse.shape == (6, 5)
        assert result.mean_rmse[result.best_index] == result.mean_rmse.min()
        assert result.best_index == int(np.flatnonzero(result.mean_rmse == result.mean_rmse.min())[0])

    def test_reference_row_recorded(self, data, plan):
        X, y = data
        grid = {"n_estimators": [150], "max_depth": [2, 6]}
        fixed = {"learning_rate": 0.1, "subsample": 0.8, "colsample_bytree": 0.7}
        result = grid_search(SearchSpace("regularized_boosting", grid, fixed), X, y, plan)
        assert result.reference_index == 1
        d = json.loads(result.to_json())
        assert d["reference_params"] == REFERENCE_OPTIMUM
        assert d["reference_mean_rmse"] == pytest.approx(result.mean_rmse[1])

    def test_random_search_repeatable(self, data, plan):
        X, y = data
        space = SearchSpace("knn", {"k": [1, 3, 5, 7, 9, 11]})
        a = random_search(space, X, y, plan, seed=4, budget=3)
        b = random_search(space, X, y, plan, seed=4, budget=3)
        assert len(a.params) == 3
        assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()

    def test_threads_do_not_change_result(self, data, plan):
        X, y = data
        space = SearchSpace("cart", {"max_depth": [2, 4, None]})
        assert grid_search(space, X, y, plan).to_json() == grid_search(space, X, y, plan, threads=4).to_json()

    def test_csv_has_one_row_per_config_and_fold(self, data, plan):
        X, y = data
        result = grid_search(SearchSpace("knn", {"k": [2, 4]}), X, y, plan)
        lines = result.to_csv().splitlines()
        assert lines[0] == "config,fold,rmse,params"
        assert len(lines) == 1 + 2 * 5

    @pytest.mark.parametrize("grid", [{}, {"k": []}])
    def test_empty_space(self, grid):
        with pytest.raises(EmptySpace):
            SearchSpace("knn", grid)

    def test_zero_budget(self, data, plan):
        X, y = data
        with pytest.raises(EmptySpace):
            random_search(SearchSpace("knn", {"k": [1]}), X, y, plan, budget=0)

    def test_invalid_candidate_rejected_up_front(self):
        with pytest.raises(InvalidConfig):
            SearchSpace("gradient_boosting", {"learning_rate": [0.1, 2.0]})

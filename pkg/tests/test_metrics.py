import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from millpdm.errors import (
    EmptyReportList,
    LengthMismatch,
    NonBinaryValue,
    ShapeMismatch,
    TooFewSamples,
    ZeroDivisionConvention,
    ZeroVariance,
)
from millpdm.metrics import (
    EvalReport,
    classification_metrics,
    rank_models,
    regression_metrics,
    reports_to_csv,
    reports_to_json,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def _vectors(n=st.integers(2, 60)):
    return n.flatmap(lambda k: st.tuples(arrays(np.float64, k, elements=finite), arrays(np.float64, k, elements=finite)))


class TestRegression:
    def test_perfect(self):
        y = np.array([0.0, 1.0, 3.0, 2.0])
        r = regression_metrics(y, y)
        assert (r.mse, r.mae, r.rmse, r.r2, r.evs, r.max_error) == (0.0, 0.0, 0.0, 1.0, 1.0, 0.0)

    def test_biased_pair(self):
        r = regression_metrics([0.0, 2.0], [1.0, 3.0])
        assert (r.mse, r.mae, r.rmse, r.max_error, r.r2, r.evs) == (1.0, 1.0, 1.0, 1.0, 0.0, 1.0)

    def test_mean_predictor(self):
        y = np.array([1.0, 4.0, 2.0, 9.0])
        r = regression_metrics(y, np.full(4, y.mean()))
        assert r.r2 == 0.0 and r.evs == 0.0

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            regression_metrics([1.0, 2.0], [1.0])
        with pytest.raises(TooFewSamples):
            regression_metrics([1.0], [1.0])
        with pytest.raises(ZeroVariance):
            regression_metrics([2.0, 2.0], [1.0, 3.0])

    def test_dict_round_trip(self):
        r = regression_metrics([0.0, 1.0, 2.0], [0.1, 0.9, 2.5], model="cart", split="test")
        assert EvalReport.from_dict(json.loads(json.dumps(r.to_dict()))) == r

    @given(_vectors())
    @settings(max_examples=150, deadline=None)
    def test_identities(self, pair):
        y, p = pair
        if np.var(y) < 1e-6:
            return
        r = regression_metrics(y, p)
        assert r.rmse**2 == pytest.approx(r.mse, rel=1e-12, abs=1e-12)
        assert r.max_error >= r.mae >= 0.0
        resid = y - p
        assert r.evs - r.r2 == pytest.approx(resid.mean() ** 2 / np.var(y), rel=1e-9, abs=1e-9)

    @given(_vectors(), st.randoms(use_true_random=False))
    @settings(max_examples=60, deadline=None)
    def test_permutation_invariance(self, pair, rnd):
        y, p = pair
        if np.var(y) < 1e-6:
            return
        idx = list(range(len(y)))
        rnd.shuffle(idx)
        a, b = regression_metrics(y, p), regression_metrics(y[idx], p[idx])
        for field in ("mse", "mae", "r2", "evs", "max_error"):
            assert getattr(a, field) == pytest.approx(getattr(b, field), rel=1e-9, abs=1e-9)

    @given(_vectors(), st.floats(-10, 10))
    @settings(max_examples=60, deadline=None)
    def test_constant_shift(self, pair, c):
        y, p = pair
        if np.var(y) < 1e-3:
            return
        a, b = regression_metrics(y, p), regression_metrics(y, p + c)
        assert b.evs == pytest.approx(a.evs, abs=1e-6)
        # R2 moves by the cross term plus c^2 / Var(y)
        expected = a.r2 - (c**2 - 2 * c * np.mean(y - p)) / np.var(y)
        assert b.r2 == pytest.approx(expected, rel=1e-6, abs=1e-6)


class TestClassification:
    def test_perfect(self):
        Y = np.array([[1, 0], [0, 1], [1, 1]])
        out = classification_metrics(Y, Y, ["a", "b"])
        assert all(m.precision == m.recall == m.f1 == 1.0 for m in out.values())

    def test_all_zero_predictions(self):
        with pytest.warns(ZeroDivisionConvention):
            m = classification_metrics([1, 0, 1], [0, 0, 0], ["x"])["x"]
        assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)

    def test_hand_counted_confusion(self):
        # TP at rows 0,1; FP at row 2; FN at row 3; TN at rows 4,5
        t = [1, 1, 0, 1, 0, 0]
        p = [1, 1, 1, 0, 0, 0]
        m = classification_metrics(t, p, ["x"])["x"]
        assert (m.tp, m.fp, m.fn, m.tn) == (2, 1, 1, 2)
        assert m.precision == pytest.approx(2 / 3) and m.recall == pytest.approx(2 / 3) and m.f1 == pytest.approx(2 / 3)

    def test_errors(self):
        with pytest.raises(ShapeMismatch):
            classification_metrics(np.zeros((3, 2)), np.zeros((3, 3)))
        with pytest.raises(NonBinaryValue):
            classification_metrics([0, 2], [0, 1])


class TestRanking:
    def _r(self, model, rmse, mae):
        return EvalReport(model, rmse**2, mae, rmse, 0.0, 0.0, 1.0, 10)

    def test_single(self):
        r = self._r("a", 1.0, 1.0)
        assert rank_models([r]) == [r]

    def test_rmse_order(self):
        gb, dt = self._r("gradient_boosting", 0.947, 0.5), self._r("cart", 1.313, 0.4)
        assert [r.model for r in rank_models([dt, gb])] == ["gradient_boosting", "cart"]

    def test_mae_tie_break(self):
        a, b = self._r("b", 1.0, 0.784), self._r("a", 1.0, 0.792)
        assert [r.model for r in rank_models([b, a])] == ["b", "a"]

    def test_empty(self):
        with pytest.raises(EmptyReportList):
            rank_models([])

    def test_csv_column_order(self):
        text = reports_to_csv([self._r("a", 1.0, 0.5)])
        assert text.splitlines()[0] == "Model,MSE,MAE,RMSE,R2,EVS,MaxError"

    def test_json_is_stable(self):
        reports = [self._r("a", 1.0, 0.5), self._r("b", 2.0, 0.5)]
        assert reports_to_json(reports) == reports_to_json(list(reports))

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from millpdm.errors import ConstantColumn, TooFewRows, UnknownColumn
from millpdm.stats import DEFAULT_COLUMNS, pearson_matrix


def _frame(a, b):
    return pd.DataFrame({"a": a, "b": b})


class TestPearson:
    def test_default_columns_cover_features_and_labels(self, small_ai4i):
        corr = pearson_matrix(small_ai4i)
        assert corr.names == DEFAULT_COLUMNS
        assert corr.values.shape == (11, 11)

    def test_matrix_laws(self, small_ai4i):
        r = pearson_matrix(small_ai4i).values
        np.testing.assert_array_equal(r, r.T)
        np.testing.assert_array_equal(np.diag(r), 1.0)
        assert (np.abs(r) <= 1.0).all()

    def test_matches_pandas(self, small_ai4i):
        corr = pearson_matrix(small_ai4i)
        ref = small_ai4i.frame[list(DEFAULT_COLUMNS)].astype(float).corr().to_numpy()
        np.testing.assert_allclose(corr.values, ref, atol=1e-12)

    def test_lookup_by_name(self, small_ai4i):
        corr = pearson_matrix(small_ai4i)
        assert corr["Torque [Nm]", "Rotational speed [rpm]"] == corr["Rotational speed [rpm]", "Torque [Nm]"]
        with pytest.raises(UnknownColumn):
            corr["Torque [Nm]", "Vibration"]

    def test_constant_column_is_zero_with_warning(self):
        with pytest.warns(ConstantColumn):
            corr = pearson_matrix(_frame([1.0, 2.0, 3.0], [4.0, 4.0, 4.0]), ["a", "b"])
        assert corr["a", "b"] == 0.0
        assert corr["b", "b"] == 1.0

    def test_unknown_column(self, small_ai4i):
        with pytest.raises(UnknownColumn):
            pearson_matrix(small_ai4i, ["Torque [Nm]", "Vibration"])

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            pearson_matrix(_frame([1.0], [2.0]), ["a", "b"])

    def test_csv_has_names_on_both_axes(self, small_ai4i):
        lines = pearson_matrix(small_ai4i, ["Torque [Nm]", "HDF"]).to_csv().splitlines()
        assert lines[0] == ",Torque [Nm],HDF"
        assert lines[1].startswith("Torque [Nm],1.0,")

    @given(
        x=arrays(np.float64, 30, elements=st.floats(-100, 100)),
        noise=arrays(np.float64, 30, elements=st.floats(-1, 1)),
        a=st.floats(0.1, 10) | st.floats(-10, -0.1),
        b=st.floats(-50, 50),
    )
    @settings(max_examples=80, deadline=None)
    def test_affine_laws(self, x, noise, a, b):
        if np.std(x) < 1e-3 or np.std(noise) < 1e-3:
            return
        y = x + noise
        exact = pearson_matrix(_frame(x, a * x + b), ["a", "b"])["a", "b"]
        assert exact == pytest.approx(np.sign(a), abs=1e-9)
        base = pearson_matrix(_frame(x, y), ["a", "b"])["a", "b"]
        scaled = pearson_matrix(_frame(x, abs(a) * y + b), ["a", "b"])["a", "b"]
        assert scaled == pytest.approx(base, abs=1e-9)

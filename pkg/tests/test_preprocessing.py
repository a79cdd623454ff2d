import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from soc_cate.core import SegmentVocabulary
from soc_cate.exceptions import DimensionMismatchError, EmptyMatrixError, UnknownCropError
from soc_cate.preprocessing import (
    ScalerParams,
    SegmentEncoder,
    StandardScaler,
    apply_scaler,
    fit_scaler,
    one_hot,
)

VOCAB = SegmentVocabulary((("PP", 3), ("SP", 2), ("WW", 1)))


def test_fit_scaler_population_std():
    params = fit_scaler([[1.0], [2.0], [3.0]])
    # Hand computation: sum of squared deviations (1 + 0 + 1) over n = 3.
    assert params.mean == (2.0,)
    assert params.scale[0] == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-15)
    assert params.scale[0] == pytest.approx(0.8164966, abs=1e-7)


def test_constant_column_scale_is_one():
    assert fit_scaler([[5.0], [5.0], [5.0]]) == ScalerParams((5.0,), (1.0,))


def test_single_row():
    assert fit_scaler([[7.0]]) == ScalerParams((7.0,), (1.0,))


def test_empty_matrix():
    with pytest.raises(EmptyMatrixError):
        fit_scaler(np.zeros((0, 3)))


def test_apply_scaler_values():
    M = [[1.0], [2.0], [3.0]]
    out = apply_scaler(fit_scaler(M), M)
    assert out.ravel() == pytest.approx([-1.2247449, 0.0, 1.2247449], abs=1e-7)


def test_constant_column_maps_to_zero():
    M = np.full((4, 1), 5.0)
    assert np.all(apply_scaler(fit_scaler(M), M) == 0)


def test_identity_params():
    M = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(apply_scaler(ScalerParams((0.0, 0.0), (1.0, 1.0)), M), M)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        apply_scaler(ScalerParams((0.0,), (1.0,)), np.zeros((2, 2)))


def test_scaler_json_round_trip():
    params = fit_scaler(np.random.default_rng(0).normal(size=(10, 9)))
    assert ScalerParams.from_json(params.to_json()) == params


matrices = arrays(
    np.float64,
    st.tuples(st.integers(2, 30), st.integers(1, 5)),
    elements=st.floats(-1e3, 1e3, allow_nan=False),
)


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_standardized_columns(M):
    params = fit_scaler(M)
    Z = apply_scaler(params, M)
    for j in range(M.shape[1]):
        if np.ptp(M[:, j]) > 1e-6 * max(1.0, np.abs(M[:, j]).max()):
            assert abs(Z[:, j].mean()) < 1e-9
            assert abs(Z[:, j].std() - 1.0) < 1e-9


@settings(max_examples=40, deadline=None)
@given(matrices, st.floats(0.1, 10), st.floats(-50, 50))
def test_apply_is_affine(M, a, b):
    params = fit_scaler(M)
    shifted = a * M + b
    direct = (shifted - np.asarray(params.mean)) / np.asarray(params.scale)
    assert np.array_equal(apply_scaler(params, shifted), direct)


def test_one_hot_positions():
    assert one_hot("PP", VOCAB) == (1, 0, 0)
    assert one_hot("WW", VOCAB) == (0, 0, 1)


def test_one_hot_unknown():
    with pytest.raises(UnknownCropError):
        one_hot("BARLEY", VOCAB)


@given(st.sampled_from(VOCAB.codes))
def test_one_hot_sums_to_one(code):
    assert sum(one_hot(code, VOCAB)) == 1


def test_column_scaler_leaves_other_columns():
    rng = np.random.default_rng(1)
    M = np.column_stack([rng.integers(0, 2, 20), rng.normal(5, 2, (20, 2))])
    out = StandardScaler(columns=[1, 2]).fit(M).transform(M)
    assert np.array_equal(out[:, 0], M[:, 0])
    assert np.allclose(out[:, 1:].mean(axis=0), 0, atol=1e-12)


def test_segment_encoder():
    enc = SegmentEncoder(n_segments=2).fit(["SP", "PP", "PP", "WW", "SP", "PP"])
    assert enc.vocabulary_.codes == ("PP", "SP")
    assert enc.transform(["SP"]).tolist() == [[0.0, 1.0]]

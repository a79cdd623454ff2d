"""Standard scaling of climate controls and one-hot encoding of crop segments."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import SegmentVocabulary
from .exceptions import DimensionMismatchError, EmptyMatrixError, UnknownCropError
from .utils.validation import check_matrix


@dataclass(frozen=True)
class ScalerParams:
    mean: tuple
    scale: tuple

    @property
    def n_columns(self) -> int:
        return len(self.mean)

    def to_json(self) -> str:
        return json.dumps({"mean": list(self.mean), "scale": list(self.scale)}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScalerParams":
        d = json.loads(text)
        return cls(tuple(float(v) for v in d["mean"]), tuple(float(v) for v in d["scale"]))


def fit_scaler(matrix) -> ScalerParams:
    """Column means and population standard deviations.

    Zero-variance columns get scale 1 so that applying the scaler maps them
    to zeros instead of dividing by zero.
    """
    M = check_matrix(matrix)
    if M.shape[0] == 0:
        raise EmptyMatrixError("cannot fit a scaler on zero rows")
    mean = M.mean(axis=0)
    std = M.std(axis=0, ddof=0)
    scale = np.where(std > 0, std, 1.0)
    return ScalerParams(tuple(mean.tolist()), tuple(scale.tolist()))


def apply_scaler(params: ScalerParams, matrix) -> np.ndarray:
    M = check_matrix(matrix, allow_empty=True)
    if M.shape[1] != params.n_columns:
        raise DimensionMismatchError(
            f"scaler fitted on {params.n_columns} columns, got {M.shape[1]}"
        )
    return (M - np.asarray(params.mean)) / np.asarray(params.scale)


def one_hot(crop_code: str, vocabulary: SegmentVocabulary) -> tuple:
    if crop_code not in vocabulary:
        raise UnknownCropError(crop_code, vocabulary.codes)
    x = [0] * len(vocabulary)
    x[vocabulary.index(crop_code)] = 1
    return tuple(x)


def scale_units(units, params: ScalerParams) -> list:
    """Return copies of ``units`` with standardized controls."""
    W = apply_scaler(params, [u.controls_w for u in units])
    return [u.with_controls(row) for u, row in zip(units, W)]


class StandardScaler(BaseEstimator, TransformerMixin):
    """Population-std scaler restricted to a subset of columns.

    Parameters
    ----------
    columns : sequence of int or None
        Columns to standardize; the rest pass through. ``None`` scales all.
    """

    def __init__(self, columns=None):
        self.columns = columns

    def _cols(self, n_features):
        return np.arange(n_features) if self.columns is None else np.asarray(self.columns, dtype=int)

    def fit(self, X, y=None):
        X = check_matrix(X)
        self.n_features_in_ = X.shape[1]
        self.params_ = fit_scaler(X[:, self._cols(X.shape[1])])
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_matrix(X, allow_empty=True)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"expected {self.n_features_in_} columns, got {X.shape[1]}"
            )
        out = X.copy()
        cols = self._cols(X.shape[1])
        out[:, cols] = apply_scaler(self.params_, X[:, cols])
        return out


class SegmentEncoder(BaseEstimator, TransformerMixin):
    """Learn a top-``n_segments`` crop vocabulary and one-hot encode crop codes."""

    def __init__(self, n_segments=3):
        self.n_segments = n_segments

    def fit(self, crops, y=None):
        self.vocabulary_ = SegmentVocabulary.from_crops(list(crops), self.n_segments)
        return self

    def transform(self, crops):
        check_is_fitted(self, "vocabulary_")
        return np.array([one_hot(c, self.vocabulary_) for c in crops], dtype=float).reshape(
            -1, len(self.vocabulary_)
        )

"""Random forests built on :mod:`soc_cate.learners._tree`."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DegenerateInputError, InvalidConfigError, SingleClassError
from ..utils.validation import check_binary, check_matrix, check_n_features, check_vector
from ._tree import build_tree


def tree_rng(seed, tree_index: int) -> np.random.Generator:
    """Independent random stream for one tree, keyed on (seed, tree index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


class _BaseForest(BaseEstimator):
    _criterion = None

    def __init__(
        self,
        n_estimators=200,
        max_depth=None,
        min_samples_leaf=5,
        max_features=None,
        bootstrap=True,
        random_state=0,
        n_jobs=1,
    ):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _default_mtry(self, p):
        raise NotImplementedError

    def _resolve_mtry(self, p):
        mtry = self._default_mtry(p) if self.max_features is None else int(self.max_features)
        if not 1 <= mtry <= p:
            raise InvalidConfigError(f"max_features={mtry} outside [1, {p}]")
        return mtry

    def _check_params(self):
        if self.n_estimators < 1:
            raise InvalidConfigError("n_estimators must be >= 1")
        if self.min_samples_leaf < 1:
            raise InvalidConfigError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidConfigError("max_depth must be >= 0 or None")

    def _grow(self, X, y):
        self._check_params()
        n, p = X.shape
        if n == 0:
            raise DegenerateInputError("cannot fit on zero samples")
        mtry = self._resolve_mtry(p)
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1)[0])

        def one(t):
            rng = tree_rng(seed, t)
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            return build_tree(
                X[rows], y[rows], self._criterion, self.max_depth,
                self.min_samples_leaf, mtry, rng,
            )

        workers = max(1, int(self.n_jobs or 1))
        if workers == 1:
            trees = [one(t) for t in range(self.n_estimators)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                trees = list(pool.map(one, range(self.n_estimators)))
        self.estimators_ = trees
        self.n_features_in_ = p
        self.max_features_ = mtry
        return self

    def _mean_prediction(self, X):
        check_is_fitted(self, "estimators_")
        X = check_matrix(X, allow_empty=True)
        check_n_features(X, self.n_features_in_)
        if X.shape[0] == 0:
            return np.zeros(0)
        return np.mean(np.stack([t.predict(X) for t in self.estimators_]), axis=0)

    def to_dict(self) -> dict:
        """Debug dump of the fitted trees; the layout is not a stable format."""
        check_is_fitted(self, "estimators_")
        return {
            "kind": type(self).__name__,
            "params": self.get_params(),
            "max_features": self.max_features_,
            "trees": [t.to_dict() for t in self.estimators_],
        }


class RandomForestRegressor(RegressorMixin, _BaseForest):
    """Bagged CART regression trees with variance-reduction splits.

    ``max_features`` defaults to ``ceil(p / 3)``. Predictions are clipped to
    the range of the training targets.
    """

    _criterion = "mse"

    def _default_mtry(self, p):
        return max(1, math.ceil(p / 3))

    def fit(self, X, y):
        X = check_matrix(X, allow_empty=True)
        y = check_vector(y, X.shape[0])
        self._grow(X, y)
        self.target_range_ = (float(y.min()), float(y.max()))
        return self

    def predict(self, X):
        return np.clip(self._mean_prediction(X), *self.target_range_)


class RandomForestClassifier(ClassifierMixin, _BaseForest):
    """Bagged CART trees with Gini splits for 0/1 labels.

    Probabilities are the mean over trees of the share of label 1 in the
    reached leaf (not a majority vote). ``max_features`` defaults to
    ``ceil(sqrt(p))``.
    """

    _criterion = "gini"

    def _default_mtry(self, p):
        return max(1, math.ceil(math.sqrt(p)))

    def fit(self, X, y):
        X = check_matrix(X, allow_empty=True)
        if X.shape[0] == 0:
            raise DegenerateInputError("cannot fit on zero samples")
        y = check_binary(y, X.shape[0], "labels")
        if y.min() == y.max():
            raise SingleClassError(f"all labels equal {int(y[0])}")
        self.classes_ = np.array([0, 1])
        return self._grow(X, y)

    def predict_proba(self, X):
        p1 = np.clip(self._mean_prediction(X), 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

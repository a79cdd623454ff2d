"""Nuisance learners and the LearnerSpec factory used by the pipeline."""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from ..exceptions import InvalidConfigError
from .forest import RandomForestClassifier, RandomForestRegressor
from .linear import LogisticClassifier, RidgeRegressor

REGRESSOR_KINDS = ("rf_regressor", "ridge_regressor")
CLASSIFIER_KINDS = ("rf_classifier", "logistic_classifier")


@dataclass(frozen=True)
class LearnerSpec:
    """Declarative description of a nuisance learner.

    ``mtry=None`` resolves at fit time to ``ceil(sqrt(p))`` for the forest
    classifier and ``ceil(p/3)`` for the forest regressor.
    """

    kind: str
    n_trees: int = 200
    max_depth: Optional[int] = None
    min_samples_leaf: int = 5
    mtry: Optional[int] = None
    bootstrap: bool = True
    ridge_lambda: float = 1e-3
    logistic_iterations: int = 100
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.kind not in REGRESSOR_KINDS + CLASSIFIER_KINDS:
            raise InvalidConfigError(f"unknown learner kind {self.kind!r}")
        if self.n_trees < 1:
            raise InvalidConfigError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise InvalidConfigError("min_samples_leaf must be >= 1")
        if self.ridge_lambda < 0:
            raise InvalidConfigError("ridge_lambda must be >= 0")

    @property
    def is_classifier(self) -> bool:
        return self.kind in CLASSIFIER_KINDS

    def with_seed(self, seed: int) -> "LearnerSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return asdict(self)

    def build(self):
        """Unfitted estimator for this spec."""
        forest = dict(
            n_estimators=self.n_trees,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            max_features=self.mtry,
            bootstrap=self.bootstrap,
            random_state=self.seed,
            n_jobs=self.n_jobs,
        )
        if self.kind == "rf_regressor":
            return RandomForestRegressor(**forest)
        if self.kind == "rf_classifier":
            return RandomForestClassifier(**forest)
        if self.kind == "ridge_regressor":
            return RidgeRegressor(alpha=self.ridge_lambda)
        return LogisticClassifier(max_iter=self.logistic_iterations)


def _fit(spec, allowed, X, y):
    if spec.kind not in allowed:
        raise InvalidConfigError(f"{spec.kind!r} is not one of {allowed}")
    return spec.build().fit(X, y)


def fit_regressor(spec: LearnerSpec, features, targets):
    return _fit(spec, REGRESSOR_KINDS, features, targets)


def fit_classifier(spec: LearnerSpec, features, labels):
    return _fit(spec, CLASSIFIER_KINDS, features, labels)


def fit_ridge(spec: LearnerSpec, features, targets):
    return _fit(spec, ("ridge_regressor",), features, targets)


def predict(model, features) -> np.ndarray:
    """Regression value, or probability of label 1 for classifiers."""
    if hasattr(model, "predict_proba"):
        return np.asarray(model.predict_proba(features))[:, 1]
    return np.asarray(model.predict(features), dtype=float)


__all__ = [
    "LearnerSpec",
    "RandomForestClassifier",
    "RandomForestRegressor",
    "LogisticClassifier",
    "RidgeRegressor",
    "fit_classifier",
    "fit_regressor",
    "fit_ridge",
    "predict",
]

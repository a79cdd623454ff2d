"""Cross-fitted nuisance estimation and the :class:`LinearDML` estimator."""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.pipeline import make_pipeline
from sklearn.utils.validation import check_is_fitted

from ..core import units_to_arrays
from ..exceptions import InvalidConfigError, NoVariationError
from ..learners import LearnerSpec, predict as learner_predict
from ..preprocessing import StandardScaler
from ..utils.validation import check_binary, check_matrix, check_one_hot, check_vector
from .final_stage import DmlFit, cate_for, featurize, fit_final_stage
from .folds import FoldPlan, make_folds
from .inference import CateReport, inference

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NuisancePredictions:
    y_hat: np.ndarray
    t_hat: np.ndarray


def _derived_seed(seed, *keys) -> int:
    return int(np.random.SeedSequence([int(seed), *keys]).generate_state(1)[0])


def _fold_learner(learner, fold: int, role: int, scale_columns=None):
    """Fresh unfitted copy of ``learner`` whose seed depends on the fold."""
    if isinstance(learner, LearnerSpec):
        model = learner.with_seed(_derived_seed(learner.seed, role, fold)).build()
    else:
        model = clone(learner)
        params = model.get_params(deep=False)
        if params.get("random_state") is not None:
            model.set_params(random_state=_derived_seed(params["random_state"], role, fold))
    if scale_columns is not None:
        model = make_pipeline(StandardScaler(columns=scale_columns), model)
    return model


def crossfit_nuisances(
    features,
    outcome,
    treatment,
    fold_plan: FoldPlan,
    regressor,
    classifier,
    n_jobs: int = 1,
    scale_columns=None,
) -> NuisancePredictions:
    """Out-of-fold predictions of E[Y | X, W] and E[T | X, W].

    For every fold k, fresh learners are trained on all other folds and
    predict fold k only. ``regressor``/``classifier`` may be a
    :class:`LearnerSpec` or any sklearn-style estimator.
    """
    F = check_matrix(features)
    y = check_vector(outcome, F.shape[0], "Y")
    t = check_binary(treatment, F.shape[0])
    if fold_plan.n != F.shape[0]:
        raise InvalidConfigError("fold plan size differs from the data")

    def run(fold):
        train, test = fold_plan.indices(fold)
        m_y = _fold_learner(regressor, fold, 1, scale_columns).fit(F[train], y[train])
        m_t = _fold_learner(classifier, fold, 2, scale_columns).fit(F[train], t[train])
        return test, learner_predict(m_y, F[test]), learner_predict(m_t, F[test])

    folds = range(fold_plan.n_folds)
    workers = max(1, int(n_jobs or 1))
    if workers == 1:
        results = [run(k) for k in folds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, folds))

    y_hat = np.full(F.shape[0], np.nan)
    t_hat = np.full(F.shape[0], np.nan)
    for test, yp, tp in results:
        y_hat[test] = yp
        t_hat[test] = tp
    return NuisancePredictions(y_hat, t_hat)


def residualize(outcome, treatment, preds: NuisancePredictions):
    y = check_vector(outcome, name="Y")
    t = check_vector(treatment, y.shape[0], "T")
    if preds.y_hat.shape[0] != y.shape[0] or preds.t_hat.shape[0] != y.shape[0]:
        raise InvalidConfigError("prediction lengths differ from the data")
    return y - preds.y_hat, t - preds.t_hat


def _segment_counts(T, X, names):
    out = {}
    for j, name in enumerate(names):
        members = X[:, j] == 1
        n_t = int(np.sum(T[members] == 1))
        n_c = int(np.sum(T[members] == 0))
        out[name] = {"n_treated": n_t, "n_control": n_c}
    return out


class LinearDML(BaseEstimator):
    """Partialling-out DML with a linear final stage in crop one-hots.

    Parameters
    ----------
    model_y : LearnerSpec or regressor
        Learner for E[Y | X, W].
    model_t : LearnerSpec or classifier
        Learner for the propensity E[T | X, W]; classifiers use
        ``predict_proba[:, 1]``.
    n_folds : int
        Cross-fitting folds.
    stratified : bool
        Balance treated units across folds.
    covariance_type : {"HC0", "HC1"}
    fit_intercept : bool
        Prepend a constant to the final-stage features. Only meaningful when
        the modifiers are not exhaustive.
    scale_per_fold : bool
        Standardize W inside each training fold instead of relying on
        pre-scaled controls.
    overlap_bounds : (float, float)
        Propensity predictions outside this range are reported as overlap
        warnings. They are never clipped.
    random_state : int
    n_jobs : int
        Threads used across folds. Results do not depend on it.
    """

    def __init__(
        self,
        model_y=None,
        model_t=None,
        n_folds=5,
        stratified=True,
        covariance_type="HC0",
        fit_intercept=False,
        scale_per_fold=False,
        overlap_bounds=(0.05, 0.95),
        random_state=0,
        n_jobs=1,
    ):
        self.model_y = model_y
        self.model_t = model_t
        self.n_folds = n_folds
        self.stratified = stratified
        self.covariance_type = covariance_type
        self.fit_intercept = fit_intercept
        self.scale_per_fold = scale_per_fold
        self.overlap_bounds = overlap_bounds
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, Y, T, X, W=None, segment_names=None, fold_plan=None):
        X = check_matrix(X)
        n, k = X.shape
        Y = check_vector(Y, n, "Y")
        T = check_binary(T, n)
        W = np.zeros((n, 0)) if W is None else check_matrix(W)
        if not self.fit_intercept:
            check_one_hot(X, n)
        names = tuple(segment_names) if segment_names is not None else tuple(str(j) for j in range(k))
        if len(names) != k:
            raise InvalidConfigError("segment_names length differs from X columns")

        model_y = self.model_y if self.model_y is not None else LearnerSpec("rf_regressor", seed=self.random_state)
        model_t = self.model_t if self.model_t is not None else LearnerSpec("rf_classifier", seed=self.random_state)

        if fold_plan is None:
            fold_plan = make_folds(n, self.n_folds, self.random_state, T, self.stratified)

        counts = _segment_counts(T, X, names)
        for name, c in counts.items():
            if c["n_treated"] == 0 or c["n_control"] == 0:
                raise NoVariationError(name)

        features = np.column_stack([X, W])
        scale_columns = list(range(k, k + W.shape[1])) if self.scale_per_fold else None
        preds = crossfit_nuisances(
            features, Y, T, fold_plan, model_y, model_t, self.n_jobs, scale_columns
        )
        ry, rt = residualize(Y, T, preds)
        fit = fit_final_stage(ry, rt, X, self.fit_intercept, self.covariance_type, names)

        lo, hi = self.overlap_bounds
        outside = int(np.sum((preds.t_hat < lo) | (preds.t_hat > hi)))
        notes = []
        if outside:
            msg = (
                f"{outside} of {n} propensity predictions outside [{lo}, {hi}] "
                f"(min {preds.t_hat.min():.4f}, max {preds.t_hat.max():.4f})"
            )
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning)
            logger.warning(msg)
        if self.fit_intercept:
            counts = {"intercept": {"n_treated": int(T.sum()), "n_control": int(n - T.sum())}, **counts}
        fit.diagnostics = {
            "t_hat_min": float(preds.t_hat.min()),
            "t_hat_max": float(preds.t_hat.max()),
            "n_outside_overlap": outside,
            "overlap_bounds": [lo, hi],
            "mean_residual_y": float(ry.mean()),
            "mean_residual_t": float(rt.mean()),
            "segments": counts,
            "fold_sizes": fold_plan.sizes(),
            "warnings": notes,
        }

        self.fold_plan_ = fold_plan
        self.nuisances_ = preds
        self.fit_ = fit
        self.coef_ = fit.beta
        self.covariance_ = fit.covariance
        return self

    def effect(self, X):
        """CATE at each row of the one-hot matrix ``X``."""
        check_is_fitted(self, "fit_")
        X = check_matrix(X)
        return np.array([cate_for(self.fit_, x) for x in X])

    predict = effect

    def summary(self, confidence: float = 0.95) -> CateReport:
        check_is_fitted(self, "fit_")
        return inference(self.fit_, confidence)


@dataclass
class DmlConfig:
    folds: int = 5
    seed: int = 0
    stratified: bool = True
    confidence: float = 0.95
    covariance_type: str = "HC0"
    fit_intercept: bool = False
    scale_per_fold: bool = False
    n_jobs: int = 1
    regressor: LearnerSpec = field(default_factory=lambda: LearnerSpec("rf_regressor"))
    classifier: LearnerSpec = field(default_factory=lambda: LearnerSpec("rf_classifier"))

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise InvalidConfigError("confidence must lie in (0, 1)")
        if self.regressor.is_classifier or not self.classifier.is_classifier:
            raise InvalidConfigError("regressor/classifier kinds are swapped")

    def to_dict(self) -> dict:
        return asdict(self)


def estimate(units, config: DmlConfig = None, segment_names=None):
    """Run folds, cross-fitting, residualization, final stage and inference.

    Returns ``(fit, report, diagnostics)``.
    """
    config = config or DmlConfig()
    Y, T, X, W = units_to_arrays(units)
    if segment_names is None:
        segment_names = _names_from_units(units, X.shape[1])
    est = LinearDML(
        model_y=config.regressor,
        model_t=config.classifier,
        n_folds=config.folds,
        stratified=config.stratified,
        covariance_type=config.covariance_type,
        fit_intercept=config.fit_intercept,
        scale_per_fold=config.scale_per_fold,
        random_state=config.seed,
        n_jobs=config.n_jobs,
    )
    est.fit(Y, T, X, W, segment_names=segment_names)
    report = est.summary(config.confidence)
    report.warnings = list(est.fit_.diagnostics["warnings"]) + report.warnings
    return est.fit_, report, est.fit_.diagnostics


def _names_from_units(units, k):
    names = [None] * k
    for u in units:
        j = list(u.modifiers_x).index(1) if 1 in u.modifiers_x else None
        if j is not None and names[j] is None and u.crop_code:
            names[j] = u.crop_code
    return [n if n is not None else str(j) for j, n in enumerate(names)]

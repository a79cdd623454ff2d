"""Ridge regression and Newton-fitted logistic regression."""
from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import DegenerateInputError, InvalidConfigError, SingleClassError, SingularSystemError
from ..utils.validation import check_binary, check_matrix, check_n_features, check_vector


class RidgeRegressor(RegressorMixin, BaseEstimator):
    """Least squares with an L2 penalty on the slopes and a free intercept.

    Solves the centered normal equations ``(Xc'Xc + alpha I) b = Xc'yc`` by
    Cholesky factorization.
    """

    def __init__(self, alpha=1e-3):
        self.alpha = alpha

    def fit(self, X, y):
        X = check_matrix(X, allow_empty=True)
        n, p = X.shape
        if n == 0:
            raise DegenerateInputError("cannot fit on zero samples")
        y = check_vector(y, n)
        if self.alpha < 0:
            raise InvalidConfigError("alpha must be >= 0")
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc = X - x_mean
        yc = y - y_mean
        if p == 0:
            coef = np.zeros(0)
        else:
            if self.alpha == 0 and np.linalg.matrix_rank(Xc) < p:
                raise SingularSystemError("unpenalized design is rank deficient")
            gram = Xc.T @ Xc + self.alpha * np.eye(p)
            try:
                coef = cho_solve(cho_factor(gram), Xc.T @ yc)
            except LinAlgError as exc:
                raise SingularSystemError(str(exc)) from exc
        self.coef_ = coef
        self.intercept_ = float(y_mean - x_mean @ coef)
        self.n_features_in_ = p
        self.target_range_ = (float(y.min()), float(y.max()))
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_matrix(X, allow_empty=True)
        check_n_features(X, self.n_features_in_)
        return X @ self.coef_ + self.intercept_


def _log_loss(eta, y):
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def _sigmoid(eta):
    return np.exp(-np.logaddexp(0.0, -eta))


class LogisticClassifier(ClassifierMixin, BaseEstimator):
    """Unpenalized logistic regression fitted by damped Newton steps.

    Each Newton direction comes from a least-squares solve of the Hessian
    system, so collinear designs (e.g. an exhaustive one-hot next to the
    intercept) still get a well-defined minimum-norm step. Steps are halved
    until the mean log-loss does not increase. Iteration stops at
    ``max_iter`` or once the gradient norm drops below ``tol``.
    """

    def __init__(self, max_iter=100, tol=1e-8):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X = check_matrix(X, allow_empty=True)
        n, p = X.shape
        if n == 0:
            raise DegenerateInputError("cannot fit on zero samples")
        y = check_binary(y, n, "labels")
        if y.min() == y.max():
            raise SingleClassError(f"all labels equal {int(y[0])}")
        A = np.column_stack([np.ones(n), X])
        beta = np.zeros(p + 1)
        eta = A @ beta
        loss = _log_loss(eta, y)
        self.n_iter_ = 0
        for it in range(int(self.max_iter)):
            mu = _sigmoid(eta)
            grad = A.T @ (mu - y) / n
            if np.linalg.norm(grad) < self.tol:
                break
            w = mu * (1.0 - mu)
            hess = (A * w[:, None]).T @ A / n
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
            t = 1.0
            for _ in range(50):
                cand = beta - t * step
                cand_eta = A @ cand
                cand_loss = _log_loss(cand_eta, y)
                if cand_loss <= loss:
                    break
                t *= 0.5
            else:
                break
            beta, eta, loss = cand, cand_eta, cand_loss
            self.n_iter_ = it + 1
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = p
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_matrix(X, allow_empty=True)
        check_n_features(X, self.n_features_in_)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p1 = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

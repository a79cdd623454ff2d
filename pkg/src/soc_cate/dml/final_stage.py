"""Residual-on-residual least squares and its heteroskedasticity-robust covariance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InvalidConfigError, InvalidModifierError, NoVariationError, SingularSystemError
from ..utils.validation import check_matrix, check_vector


@dataclass
class DmlFit:
    beta: np.ndarray
    covariance: np.ndarray
    residuals_y: np.ndarray
    residuals_t: np.ndarray
    fit_intercept: bool = False
    covariance_type: str = "HC0"
    segment_names: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_segments(self) -> int:
        return self.beta.shape[0] - int(self.fit_intercept)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "covariance": self.covariance.tolist(),
            "fit_intercept": self.fit_intercept,
            "covariance_type": self.covariance_type,
            "segment_names": list(self.segment_names),
            "residuals_y": self.residuals_y.tolist(),
            "residuals_t": self.residuals_t.tolist(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DmlFit":
        return cls(
            beta=np.asarray(d["beta"], dtype=float),
            covariance=np.asarray(d["covariance"], dtype=float),
            residuals_y=np.asarray(d["residuals_y"], dtype=float),
            residuals_t=np.asarray(d["residuals_t"], dtype=float),
            fit_intercept=bool(d["fit_intercept"]),
            covariance_type=d["covariance_type"],
            segment_names=tuple(d["segment_names"]),
            diagnostics=d.get("diagnostics", {}),
        )


def featurize(modifiers, fit_intercept: bool = False) -> np.ndarray:
    """Final-stage features of ``x``: the one-hot itself, optionally led by 1."""
    X = check_matrix(modifiers)
    if fit_intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    return X


def fit_final_stage(
    residuals_y,
    residuals_t,
    modifiers,
    fit_intercept: bool = False,
    covariance_type: str = "HC0",
    segment_names=None,
) -> DmlFit:
    """Regress outcome residuals on ``residual_t * phi(x)``.

    With exhaustive one-hot modifiers and no intercept the normal equations
    are diagonal, so coefficient j is
    ``sum(ry * rt) / sum(rt**2)`` over segment j.
    """
    ry = check_vector(residuals_y, name="residuals_y")
    rt = check_vector(residuals_t, ry.shape[0], name="residuals_t")
    Phi = featurize(modifiers, fit_intercept)
    if Phi.shape[0] != ry.shape[0]:
        raise InvalidModifierError("modifiers and residuals differ in length")
    n, k = Phi.shape
    names = list(segment_names) if segment_names is not None else [str(j) for j in range(Phi.shape[1] - int(fit_intercept))]
    if fit_intercept:
        names = ["intercept"] + names

    Z = rt[:, None] * Phi
    zz = np.sum(Z * Z, axis=0)
    for j in np.flatnonzero(zz <= 0):
        raise NoVariationError(names[j])
    gram = Z.T @ Z
    try:
        bread = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("final-stage design is singular") from exc
    if not np.all(np.isfinite(bread)):
        raise SingularSystemError("final-stage design is singular")
    beta = bread @ (Z.T @ ry)
    if not fit_intercept and _is_one_hot(Phi):
        # Exact per-segment form; same value as the solve up to rounding.
        beta = (Z.T @ ry) / zz

    resid = ry - Z @ beta
    meat = (Z * (resid * resid)[:, None]).T @ Z
    cov = bread @ meat @ bread
    ctype = covariance_type.upper()
    if ctype == "HC1":
        if n <= k:
            raise InvalidConfigError("HC1 needs more units than coefficients")
        cov = cov * (n / (n - k))
    elif ctype != "HC0":
        raise InvalidConfigError(f"unknown covariance type {covariance_type!r}")
    cov = (cov + cov.T) / 2.0
    return DmlFit(
        beta=beta,
        covariance=cov,
        residuals_y=ry,
        residuals_t=rt,
        fit_intercept=fit_intercept,
        covariance_type=ctype,
        segment_names=tuple(names[int(fit_intercept):]),
    )


def _is_one_hot(Phi) -> bool:
    return bool(np.all((Phi == 0) | (Phi == 1)) and np.all(Phi.sum(axis=1) == 1))


def cate_for(fit: DmlFit, x) -> float:
    """Effect at modifier vector ``x``: ``phi(x) . beta``."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != fit.n_segments:
        raise InvalidModifierError(f"expected length {fit.n_segments}, got {x.shape[0]}")
    if not np.all((x == 0) | (x == 1)) or x.sum() != 1:
        raise InvalidModifierError("x must be a one-hot vector")
    j = int(np.flatnonzero(x)[0])
    if fit.fit_intercept:
        return float(fit.beta[0] + fit.beta[1 + j])
    return float(fit.beta[j])

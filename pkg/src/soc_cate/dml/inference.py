"""Per-segment z-tests and confidence intervals."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .final_stage import DmlFit
from .stats import critical_value, two_sided_p


@dataclass(frozen=True)
class SegmentEstimate:
    crop_code: str
    point: float
    std_error: float
    z_score: float
    p_value: float
    ci_low: float
    ci_high: float
    n_treated: int = 0
    n_control: int = 0


@dataclass
class CateReport:
    segments: list
    confidence: float = 0.95
    warnings: list = field(default_factory=list)

    def __getitem__(self, crop_code) -> SegmentEstimate:
        for s in self.segments:
            if s.crop_code == crop_code:
                return s
        raise KeyError(crop_code)

    def to_dict(self) -> dict:
        rows = []
        for s in self.segments:
            d = asdict(s)
            if math.isinf(d["z_score"]):
                d["z_score"] = "inf" if d["z_score"] > 0 else "-inf"
            rows.append(d)
        return {"confidence": self.confidence, "segments": rows, "warnings": list(self.warnings)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "CateReport":
        segs = []
        for row in d["segments"]:
            row = dict(row)
            row["z_score"] = float(row["z_score"])
            segs.append(SegmentEstimate(**row))
        return cls(segs, d.get("confidence", 0.95), list(d.get("warnings", [])))


def segment_row(crop_code, point, std_error, confidence=0.95, n_treated=0, n_control=0):
    """Build one report row from a point estimate and its standard error.

    ``std_error == 0`` is handled by convention: ``z = 0, p = 1`` when the
    point is also zero, otherwise ``z = +/-inf`` and ``p = 0`` with a warning.
    """
    point = float(point)
    se = float(std_error)
    q = critical_value(confidence)
    if se > 0:
        z = point / se
    elif point == 0:
        z = 0.0
    else:
        z = math.copysign(math.inf, point)
        warnings.warn(f"segment {crop_code}: zero standard error with nonzero point", RuntimeWarning)
    p = 1.0 if (se == 0 and point == 0) else two_sided_p(z)
    return SegmentEstimate(
        crop_code=str(crop_code),
        point=point,
        std_error=se,
        z_score=z,
        p_value=min(max(p, 0.0), 1.0),
        ci_low=point - q * se,
        ci_high=point + q * se,
        n_treated=int(n_treated),
        n_control=int(n_control),
    )


def inference(fit: DmlFit, confidence: float = 0.95) -> CateReport:
    names = list(fit.segment_names)
    if fit.fit_intercept:
        names = ["intercept"] + names
    counts = fit.diagnostics.get("segments", {})
    se = np.sqrt(np.clip(np.diag(fit.covariance), 0.0, None))
    rows, notes = [], []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for name, b, s in zip(names, fit.beta, se):
            c = counts.get(name, {})
            rows.append(segment_row(name, b, s, confidence, c.get("n_treated", 0), c.get("n_control", 0)))
    for w in caught:
        notes.append(str(w.message))
        warnings.warn(w.message, w.category)
    return CateReport(rows, confidence, notes)

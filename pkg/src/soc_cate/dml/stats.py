"""Standard normal distribution helpers."""
from __future__ import annotations

import math
from statistics import NormalDist

_STD_NORMAL = NormalDist()


def normal_cdf(z: float) -> float:
    """Standard normal CDF, computed through ``erfc`` to keep tail accuracy."""
    if math.isnan(z):
        raise ValueError("z is NaN")
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_ppf(p: float) -> float:
    """Inverse standard normal CDF for ``p`` in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


def two_sided_p(z: float) -> float:
    if math.isinf(z):
        return 0.0
    return 2.0 * (1.0 - normal_cdf(abs(z)))


def critical_value(confidence: float) -> float:
    """Two-sided normal quantile, e.g. 1.959964 for 0.95."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    return normal_ppf(1.0 - (1.0 - confidence) / 2.0)

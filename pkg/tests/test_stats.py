import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soc_cate.dml.stats import critical_value, normal_cdf, normal_ppf, two_sided_p

mpmath.mp.dps = 40


def reference_cdf(z):
    return float(mpmath.ncdf(mpmath.mpf(z)))


def test_cdf_at_zero():
    assert normal_cdf(0.0) == 0.5


def test_cdf_at_975_quantile():
    assert normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    assert normal_cdf(1.959964) == pytest.approx(reference_cdf(1.959964), abs=1e-15)


@given(st.floats(-8, 8, allow_nan=False))
def test_cdf_matches_high_precision(z):
    assert abs(normal_cdf(z) - reference_cdf(z)) < 1e-7


@given(st.floats(-8, 8, allow_nan=False))
def test_cdf_symmetry(z):
    assert normal_cdf(-z) == pytest.approx(1 - normal_cdf(z), abs=1e-15)


@given(st.floats(1e-6, 1 - 1e-6))
def test_ppf_inverts_cdf(p):
    z = normal_ppf(p)
    ref = float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))
    assert abs(z - ref) < 1e-9


def test_critical_value():
    assert critical_value(0.95) == pytest.approx(1.959963984540054, abs=1e-12)


def test_two_sided_p():
    assert two_sided_p(0.0) == 1.0
    assert two_sided_p(math.inf) == 0.0
    assert two_sided_p(-1.96) == pytest.approx(0.05, abs=1e-4)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_ppf_domain(bad):
    with pytest.raises(ValueError):
        normal_ppf(bad)


def test_cdf_rejects_nan():
    with pytest.raises(ValueError):
        normal_cdf(float("nan"))

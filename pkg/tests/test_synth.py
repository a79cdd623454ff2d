import json
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from soc_cate.dml import DmlConfig, segment_row
from soc_cate.dml.inference import CateReport
from soc_cate.exceptions import InvalidConfigError, InvalidModifierError
from soc_cate.ingest import TreatmentWindow, assemble, load_sources
from soc_cate.learners import LearnerSpec
from soc_cate.synth import (
    CLIMATE_LOCATION,
    CLIMATE_SCALE,
    DgpConfig,
    generate,
    monte_carlo_coverage,
    oracle_cate,
    simulate,
    write_dataset,
)

ZERO_PROPENSITY = (0.0,) * 12


def test_deterministic_outcome():
    cfg = DgpConfig(n=500, theta=(1.0, 0.0, 0.0), noise_sd=0.0, outcome_weights=(0.0,) * 9, baseline=0.0)
    units, _ = generate(cfg)
    pp = [u for u in units if u.crop_code == "PP"]
    assert pp and all(u.outcome == u.treatment for u in pp)


def test_null_propensity_treated_share():
    units, _ = generate(DgpConfig(n=10_000, propensity_weights=ZERO_PROPENSITY, seed=3))
    k = sum(u.treatment for u in units)
    ci = stats.binomtest(k, 10_000, 0.5).proportion_ci(0.99)
    assert ci.low <= 0.5 <= ci.high


def test_same_seed_same_data():
    a, _ = generate(DgpConfig(n=200, seed=9))
    b, _ = generate(DgpConfig(n=200, seed=9))
    c, _ = generate(DgpConfig(n=200, seed=10))
    assert a == b and a != c


def test_oracle_cate():
    cfg = DgpConfig()
    assert oracle_cate(cfg, [1, 0, 0]) == 0.06
    assert oracle_cate(cfg, [0, 0, 1]) == -0.09
    zero = DgpConfig(theta=(0.0, 0.0, 0.0))
    assert all(oracle_cate(zero, x) == 0 for x in np.eye(3, dtype=int))
    with pytest.raises(InvalidModifierError):
        oracle_cate(cfg, [1, 1, 0])


def test_additive_noise_identity():
    s = simulate(DgpConfig(n=3000, seed=4))
    for j, theta in enumerate(s.theta):
        diff = (s.y1 - s.y0)[s.segment == j]
        assert abs(diff.mean() - theta) <= 1e-12


def test_propensity_strictly_inside_unit_interval():
    s = simulate(DgpConfig(n=2000, seed=1))
    assert np.all((s.propensity > 0) & (s.propensity < 1))


def test_difference_in_means_unbiased_under_null_propensity():
    s = simulate(DgpConfig(n=50_000, propensity_weights=ZERO_PROPENSITY, seed=8))
    Y = np.array([u.outcome for u in s.units])
    T = np.array([u.treatment for u in s.units])
    for j, theta in enumerate(s.theta):
        m = s.segment == j
        y1, y0 = Y[m & (T == 1)], Y[m & (T == 0)]
        est = y1.mean() - y0.mean()
        se = math.sqrt(y1.var(ddof=1) / y1.size + y0.var(ddof=1) / y0.size)
        assert abs(est - theta) <= 3 * se


def test_affine_distortion_maps_confounders():
    s = simulate(DgpConfig(n=50, affine_distortion=True))
    W = np.array([u.controls_w for u in s.units])
    assert np.allclose(W, CLIMATE_LOCATION + CLIMATE_SCALE * s.confounders)


@pytest.mark.parametrize(
    "change",
    [
        dict(segment_probs=(0.5, 0.4, 0.2)),
        dict(noise_sd=-1.0),
        dict(theta=(0.1, 0.2)),
        dict(propensity_weights=(0.0,) * 5),
        dict(outcome_weights=(0.0,) * 3),
        dict(n=0),
    ],
)
def test_invalid_config(change):
    with pytest.raises(InvalidConfigError):
        generate(replace(DgpConfig(), **change))


def test_large_logit_warns():
    with pytest.warns(RuntimeWarning, match="logit"):
        generate(DgpConfig(n=100, propensity_weights=(5.0,) + (0.0,) * 11))


def oracle_stub(sd):
    """Truth plus calibrated normal noise, reported with its true SE."""

    def run(units, cfg):
        rng = np.random.default_rng(cfg.seed)
        rows = [segment_row(c, t + sd * rng.standard_normal(), sd) for c, t in zip(cfg.crop_codes, cfg.theta)]
        return CateReport(rows)

    return run


def test_oracle_stub_coverage():
    res = monte_carlo_coverage(DgpConfig(n=30), reps=400, estimator=oracle_stub(0.1))
    for seg in res.segments.values():
        # binomial(400, 0.95) 99.9% band is roughly [0.91, 0.98]
        assert 0.91 <= seg["coverage"] <= 0.985
        assert seg["mean_se"] == pytest.approx(0.1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_single_rep_coverage_is_binary():
    cfg = DmlConfig(folds=2, regressor=LearnerSpec("ridge_regressor"), classifier=LearnerSpec("logistic_classifier"))
    res = monte_carlo_coverage(DgpConfig(n=300), cfg, reps=1)
    assert all(seg["coverage"] in (0.0, 1.0) for seg in res.segments.values())
    assert res.points.shape == (1, 3)


def test_coverage_threads_do_not_change_result():
    a = monte_carlo_coverage(DgpConfig(n=30), reps=20, estimator=oracle_stub(0.1), n_jobs=1)
    b = monte_carlo_coverage(DgpConfig(n=30), reps=20, estimator=oracle_stub(0.1), n_jobs=4)
    assert a.to_dict() == b.to_dict()


def test_coverage_rejects_zero_reps():
    with pytest.raises(InvalidConfigError):
        monte_carlo_coverage(DgpConfig(n=30), reps=0)


def test_written_dataset_round_trips(tmp_path):
    cfg = DgpConfig(n=150, seed=6)
    paths = write_dataset(cfg, tmp_path)
    sample = simulate(cfg)
    lpis, climate, soc = load_sources(paths["lpis"], paths["climate"], paths["soc"])
    units, vocab, report = assemble(lpis, climate, soc, TreatmentWindow((2020, 2021)), 3)
    assert report.n_excluded == 0 and report.n == cfg.n
    assert set(vocab.codes) == set(cfg.crop_codes)
    by_id = {u.field_id: u for u in sample.units}
    phys = CLIMATE_LOCATION + CLIMATE_SCALE * sample.confounders
    for u in units:
        src = by_id[u.field_id]
        assert u.treatment == src.treatment and u.outcome == src.outcome
        assert u.crop_code == src.crop_code
        i = int(u.field_id[1:])
        assert np.allclose(u.controls_w, phys[i], rtol=0, atol=1e-9 * np.abs(phys[i]).max())
    truth = json.loads(open(paths["truth"]).read())
    assert truth["theta"] == {"PP": 0.06, "SP": -0.08, "WW": -0.09}
    geo = json.loads(open(paths["geometry"]).read())
    assert len(geo["features"]) == cfg.n


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_null_effect_coverage_with_linear_nuisances():
    cfg = DmlConfig(regressor=LearnerSpec("ridge_regressor"), classifier=LearnerSpec("logistic_classifier"))
    res = monte_carlo_coverage(DgpConfig(n=5_000, theta=(0.0, 0.0, 0.0), seed=11), cfg, reps=100)
    for seg in res.segments.values():
        assert 0.88 <= seg["coverage"] <= 0.99

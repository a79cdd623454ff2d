"""Synthetic data with known per-crop effects, and a coverage harness.

Confounders W are independent standard normals. Treatment follows a
logistic propensity in (W, crop); the outcome is
``Y = baseline + g(W) + theta[crop] * T + noise`` with ``g`` linear (plus an
optional ``sin`` of the first confounder).
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import CLIMATE_VARIABLES, N_CLIMATE, AnalysisUnit
from .exceptions import InvalidConfigError, InvalidModifierError

# Typical per-field climate level and spread used to turn standardized
# confounders into plausible physical values (physical units).
CLIMATE_LOCATION = np.array([280.5, 281.0, 0.30, 1.5, 0.5, 0.0015, 2.5, 0.0008, 0.0021])
CLIMATE_SCALE = np.array([1.0, 1.0, 0.04, 0.4, 0.4, 0.0002, 0.4, 0.0002, 0.0003])

SIM_YEARS = (2017, 2018, 2019, 2020, 2021)
SIM_WINDOW = (2020, 2021)
MAX_ABS_LOGIT = 4.0


@dataclass(frozen=True)
class DgpConfig:
    n: int = 2000
    segment_probs: tuple = (0.45, 0.35, 0.20)
    theta: tuple = (0.06, -0.08, -0.09)
    crop_codes: tuple = ("PP", "SP", "WW")
    confounder_dim: int = N_CLIMATE
    # First ``confounder_dim`` entries act on W, the remaining K on the crop one-hot.
    propensity_weights: tuple = (0.4, -0.3, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, -0.1, 0.0)
    propensity_intercept: float = 0.0
    outcome_weights: tuple = (0.3, 0.2, -0.2, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0)
    outcome_nonlinearity: bool = False
    baseline: float = 4.0
    noise_sd: float = 0.3
    affine_distortion: bool = False
    seed: int = 0

    def validate(self) -> None:
        k = len(self.theta)
        if self.n < 1:
            raise InvalidConfigError("n must be >= 1")
        if len(self.segment_probs) != k or len(self.crop_codes) != k:
            raise InvalidConfigError("segment_probs, theta and crop_codes must have equal length")
        if any(p < 0 for p in self.segment_probs) or not math.isclose(sum(self.segment_probs), 1.0, abs_tol=1e-9):
            raise InvalidConfigError("segment_probs must be a probability vector")
        if self.confounder_dim != N_CLIMATE:
            raise InvalidConfigError(f"confounder_dim must be {N_CLIMATE}")
        if len(self.propensity_weights) != self.confounder_dim + k:
            raise InvalidConfigError(f"propensity_weights needs {self.confounder_dim + k} entries")
        if len(self.outcome_weights) != self.confounder_dim:
            raise InvalidConfigError(f"outcome_weights needs {self.confounder_dim} entries")
        if self.noise_sd < 0:
            raise InvalidConfigError("noise_sd must be >= 0")
        if len(set(self.crop_codes)) != k:
            raise InvalidConfigError("crop_codes must be distinct")

    @property
    def k(self) -> int:
        return len(self.theta)


@dataclass
class SyntheticSample:
    units: list
    theta: np.ndarray
    confounders: np.ndarray
    segment: np.ndarray
    propensity: np.ndarray
    y0: np.ndarray
    y1: np.ndarray


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def simulate(config: DgpConfig) -> SyntheticSample:
    """Draw a sample, keeping both potential outcomes for oracle checks."""
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed)]))
    n, k, d = config.n, config.k, config.confounder_dim
    W = rng.standard_normal((n, d))
    seg = rng.choice(k, size=n, p=np.asarray(config.segment_probs, dtype=float))
    X = np.zeros((n, k), dtype=int)
    X[np.arange(n), seg] = 1

    pw = np.asarray(config.propensity_weights, dtype=float)
    logit = config.propensity_intercept + W @ pw[:d] + X @ pw[d:]
    if np.max(np.abs(logit)) > MAX_ABS_LOGIT:
        warnings.warn(
            f"max |logit| = {np.max(np.abs(logit)):.2f} exceeds {MAX_ABS_LOGIT}; overlap is weak",
            RuntimeWarning,
        )
    e = sigmoid(logit)
    T = (rng.random(n) < e).astype(int)

    g = config.baseline + W @ np.asarray(config.outcome_weights, dtype=float)
    if config.outcome_nonlinearity:
        g = g + np.sin(W[:, 0])
    noise = rng.normal(0.0, config.noise_sd, size=n) if config.noise_sd > 0 else np.zeros(n)
    theta = np.asarray(config.theta, dtype=float)
    y0 = g + noise
    y1 = y0 + theta[seg]
    Y = np.where(T == 1, y1, y0)

    W_obs = CLIMATE_LOCATION + CLIMATE_SCALE * W if config.affine_distortion else W
    width = len(str(n))
    units = [
        AnalysisUnit(
            field_id=f"F{i:0{width}d}",
            treatment=int(T[i]),
            outcome=float(Y[i]),
            modifiers_x=tuple(int(v) for v in X[i]),
            controls_w=tuple(float(v) for v in W_obs[i]),
            crop_code=config.crop_codes[seg[i]],
            geometry_ref=f"G{i:0{width}d}",
        )
        for i in range(n)
    ]
    return SyntheticSample(units, theta, W, seg, e, y0, y1)


def generate(config: DgpConfig):
    """Return ``(units, theta)``."""
    s = simulate(config)
    return s.units, s.theta


def oracle_cate(config: DgpConfig, x) -> float:
    x = np.asarray(x).ravel()
    if x.shape[0] != config.k or not np.all((x == 0) | (x == 1)) or x.sum() != 1:
        raise InvalidModifierError(f"x must be a one-hot vector of length {config.k}")
    return float(config.theta[int(np.flatnonzero(x)[0])])


# --------------------------------------------------------------------------
# Writing synthetic data in the ingest CSV formats


def write_dataset(config: DgpConfig, out_dir) -> dict:
    """Write ``lpis.csv``, ``climate.csv``, ``soc.csv``, ``geometry.geojson``
    and ``truth.json`` under ``out_dir``; return the paths.

    Every field has the same crop in both window years and a record for every
    year, so ingestion excludes nothing. Climate values are the standardized
    confounders mapped to physical units, jittered symmetrically across the
    window years so that their window mean reproduces the confounder.
    """
    sample = simulate(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 7]))
    n = config.n
    phys = CLIMATE_LOCATION + CLIMATE_SCALE * sample.confounders

    paths = {
        "lpis": out / "lpis.csv",
        "climate": out / "climate.csv",
        "soc": out / "soc.csv",
        "geometry": out / "geometry.geojson",
        "truth": out / "truth.json",
    }
    other_crops = list(config.crop_codes) + ["OTHER"]
    with open(paths["lpis"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field_id", "year", "crop_code", "eco", "geometry_ref"])
        for i, u in enumerate(sample.units):
            if u.treatment:
                eco_window = (1, 1)
            else:
                eco_window = [(0, 0), (0, 1), (1, 0)][rng.choice(3, p=[0.6, 0.2, 0.2])]
            for year in SIM_YEARS:
                if year in SIM_WINDOW:
                    crop, eco = u.crop_code, eco_window[SIM_WINDOW.index(year)]
                else:
                    crop, eco = other_crops[rng.integers(len(other_crops))], int(rng.integers(2))
                w.writerow([u.field_id, year, crop, eco, u.geometry_ref])

    lo_bound = np.array([-np.inf, -np.inf, 0.0, -np.inf, -np.inf, -np.inf, 0.0, -np.inf, 0.0])
    hi_bound = np.array([np.inf, np.inf, 1.0, np.inf, np.inf, np.inf, np.inf, np.inf, np.inf])
    with open(paths["climate"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field_id", "year", *CLIMATE_VARIABLES])
        for i, u in enumerate(sample.units):
            jitter = 0.05 * CLIMATE_SCALE * rng.standard_normal(N_CLIMATE)
            for year in SIM_YEARS:
                if year == SIM_WINDOW[0]:
                    vals = phys[i] - jitter
                elif year == SIM_WINDOW[1]:
                    vals = phys[i] + jitter
                else:
                    vals = phys[i] + 0.5 * CLIMATE_SCALE * rng.standard_normal(N_CLIMATE)
                vals = np.clip(vals, lo_bound, hi_bound)
                w.writerow([u.field_id, year, *(repr(float(v)) for v in vals)])

    with open(paths["soc"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field_id", "soc_pct"])
        for u in sample.units:
            if not 0.0 <= u.outcome <= 100.0:
                raise InvalidConfigError(
                    f"simulated SOC {u.outcome} for {u.field_id} outside [0, 100]; raise baseline"
                )
            w.writerow([u.field_id, repr(u.outcome)])

    paths["geometry"].write_text(json.dumps(_grid_geometry(sample.units)), encoding="utf-8")
    truth = {
        "theta": dict(zip(config.crop_codes, map(float, config.theta))),
        "window": list(SIM_WINDOW),
        "config": asdict(config),
    }
    paths["truth"].write_text(json.dumps(truth, indent=2), encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


def _grid_geometry(units, lon0=21.0, lat0=54.0, step=0.01, size=0.008):
    cols = max(1, math.ceil(math.sqrt(len(units))))
    feats = []
    for i, u in enumerate(units):
        x0 = round(lon0 + (i % cols) * step, 6)
        y0 = round(lat0 + (i // cols) * step, 6)
        x1, y1 = round(x0 + size, 6), round(y0 + size, 6)
        feats.append({
            "type": "Feature",
            "id": u.geometry_ref,
            "properties": {"geometry_ref": u.geometry_ref},
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
            },
        })
    return {"type": "FeatureCollection", "features": feats}


# --------------------------------------------------------------------------
# Monte Carlo harness


@dataclass
class CoverageResult:
    reps: int
    confidence: float
    segments: dict = field(default_factory=dict)
    points: np.ndarray = None
    std_errors: np.ndarray = None

    def to_dict(self) -> dict:
        return {"reps": self.reps, "confidence": self.confidence, "segments": self.segments}


def _rep_seed(seed, rep):
    return int(np.random.SeedSequence([int(seed), 1000003, int(rep)]).generate_state(1)[0])


def monte_carlo_coverage(config: DgpConfig, estimator_config=None, reps: int = 100, estimator=None, n_jobs: int = 1):
    """Repeat generate -> estimate and summarize per-segment accuracy.

    ``estimator(units, rep_config)`` may replace the DML pipeline; it must
    return a :class:`~soc_cate.dml.CateReport`. Each rep uses its own data
    seed and estimator seed derived from ``config.seed``.
    """
    from .dml import DmlConfig, estimate

    if reps < 1:
        raise InvalidConfigError("reps must be >= 1")
    estimator_config = estimator_config or DmlConfig()

    def one(rep):
        cfg = replace(config, seed=_rep_seed(config.seed, rep))
        units, _ = generate(cfg)
        if estimator is not None:
            report = estimator(units, cfg)
        else:
            ecfg = replace(estimator_config, seed=_rep_seed(estimator_config.seed, rep))
            _, report, _ = estimate(units, ecfg)
        return [(report[c].point, report[c].std_error, report[c].ci_low, report[c].ci_high) for c in config.crop_codes]

    workers = max(1, int(n_jobs))
    if workers == 1:
        rows = [one(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(reps)))
    arr = np.asarray(rows, dtype=float)  # reps x K x 4
    theta = np.asarray(config.theta, dtype=float)
    points, ses, lo, hi = arr[..., 0], arr[..., 1], arr[..., 2], arr[..., 3]
    result = CoverageResult(reps, estimator_config.confidence, points=points, std_errors=ses)
    for j, code in enumerate(config.crop_codes):
        err = points[:, j] - theta[j]
        result.segments[code] = {
            "theta": float(theta[j]),
            "coverage": float(np.mean((lo[:, j] <= theta[j]) & (theta[j] <= hi[:, j]))),
            "bias": float(np.mean(err)),
            "rmse": float(np.sqrt(np.mean(err ** 2))),
            "mean_se": float(np.mean(ses[:, j])),
            "within_3se": int(np.sum(np.abs(err) <= 3 * ses[:, j])),
        }
    return result

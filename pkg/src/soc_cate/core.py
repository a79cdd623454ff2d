"""Domain records shared by ingestion, estimation and reporting."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

#: Climate columns in canonical order, as they appear in the climate CSV.
CLIMATE_VARIABLES = (
    "air_temp",
    "soil_temp",
    "soil_moisture",
    "wind_u",
    "wind_v",
    "evapotranspiration",
    "lai",
    "runoff",
    "precipitation",
)
N_CLIMATE = len(CLIMATE_VARIABLES)

#: Year span of the source declarations.
DATA_YEARS = (2017, 2021)


@dataclass(frozen=True)
class FieldYearRecord:
    field_id: str
    year: int
    crop_code: str
    eco_enrolled: bool
    geometry_ref: Optional[str] = None


@dataclass(frozen=True)
class ClimateRecord:
    """Per-field, per-year climate values.

    Units: temperatures in K, soil moisture in m3/m3, winds in m/s,
    evapotranspiration/runoff/precipitation in metres of water, LAI in m2/m2.
    """

    field_id: str
    year: int
    air_temperature: float
    soil_temperature: float
    soil_moisture: float
    wind_u: float
    wind_v: float
    evapotranspiration: float
    leaf_area_index: float
    runoff: float
    precipitation: float

    @property
    def values(self) -> tuple:
        return (
            self.air_temperature,
            self.soil_temperature,
            self.soil_moisture,
            self.wind_u,
            self.wind_v,
            self.evapotranspiration,
            self.leaf_area_index,
            self.runoff,
            self.precipitation,
        )

    def violations(self) -> list:
        out = []
        if not all(math.isfinite(v) for v in self.values):
            out.append("non-finite climate value")
        elif not 0.0 <= self.soil_moisture <= 1.0:
            out.append("soil_moisture outside [0, 1]")
        elif self.leaf_area_index < 0:
            out.append("lai negative")
        elif self.precipitation < 0:
            out.append("precipitation negative")
        return out


@dataclass(frozen=True)
class SocRecord:
    field_id: str
    soc_pct: float

    def violations(self) -> list:
        if not math.isfinite(self.soc_pct):
            return ["soc_pct not finite"]
        if not 0.0 <= self.soc_pct <= 100.0:
            return ["soc_pct outside [0, 100]"]
        return []


@dataclass(frozen=True)
class AnalysisUnit:
    """One field ready for estimation.

    ``crop_code`` and ``geometry_ref`` are carried along for reporting only;
    the estimator never reads them.
    """

    field_id: str
    treatment: int
    outcome: float
    modifiers_x: tuple
    controls_w: tuple
    fold: int = -1
    crop_code: Optional[str] = None
    geometry_ref: Optional[str] = None

    def with_controls(self, controls_w) -> "AnalysisUnit":
        return replace(self, controls_w=tuple(float(v) for v in controls_w))

    def with_fold(self, fold: int) -> "AnalysisUnit":
        return replace(self, fold=int(fold))


@dataclass(frozen=True)
class SegmentVocabulary:
    """Top-K crops ordered by field count (descending), ties by crop code."""

    entries: tuple = field(default_factory=tuple)

    @classmethod
    def from_crops(cls, crop_codes: Iterable[str], k: int = 3) -> "SegmentVocabulary":
        if k < 1:
            raise ValueError("k must be >= 1")
        counts = Counter(crop_codes)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(tuple(ranked[:k]))

    @property
    def codes(self) -> tuple:
        return tuple(code for code, _ in self.entries)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, crop_code):
        return crop_code in self.codes

    def index(self, crop_code: str) -> int:
        return self.codes.index(crop_code)

    def to_dict(self) -> dict:
        return {"segments": [{"crop_code": c, "field_count": n} for c, n in self.entries]}

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentVocabulary":
        return cls(tuple((s["crop_code"], int(s["field_count"])) for s in d["segments"]))


def validate_unit(unit: AnalysisUnit, n_controls: int = N_CLIMATE) -> list:
    """Return every violated invariant of ``unit``; an empty list means valid."""
    problems = []
    if unit.treatment not in (0, 1):
        problems.append("treatment not in {0, 1}")
    if not _is_finite(unit.outcome):
        problems.append("non-finite outcome")
    x = unit.modifiers_x
    if any(v not in (0, 1) for v in x):
        problems.append("modifier not binary")
    if sum(x) != 1:
        problems.append("one-hot sum != 1")
    if len(unit.controls_w) != n_controls:
        problems.append(f"controls length {len(unit.controls_w)} != {n_controls}")
    if not all(_is_finite(v) for v in unit.controls_w):
        problems.append("non-finite control")
    if not isinstance(unit.fold, (int, np.integer)) or unit.fold < -1:
        problems.append("fold must be an integer >= -1")
    return problems


def _is_finite(v) -> bool:
    try:
        return math.isfinite(v)
    except TypeError:
        return False


def units_to_arrays(units: Sequence[AnalysisUnit]):
    """Stack units into ``(Y, T, X, W)`` arrays."""
    Y = np.array([u.outcome for u in units], dtype=float)
    T = np.array([u.treatment for u in units], dtype=float)
    X = np.array([u.modifiers_x for u in units], dtype=float)
    W = np.array([u.controls_w for u in units], dtype=float)
    return Y, T, X, W


def write_units(path, units: Sequence[AnalysisUnit]) -> None:
    """Write units as CSV; floats use ``repr`` so reading back is lossless."""
    if not units:
        raise ValueError("no units to write")
    k = len(units[0].modifiers_x)
    p = len(units[0].controls_w)
    header = (
        ["field_id", "crop_code", "geometry_ref", "treatment", "outcome", "fold"]
        + [f"x{j}" for j in range(k)]
        + [f"w{j}" for j in range(p)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for u in units:
            writer.writerow(
                [u.field_id, u.crop_code or "", u.geometry_ref or "", u.treatment,
                 repr(float(u.outcome)), u.fold]
                + [int(v) for v in u.modifiers_x]
                + [repr(float(v)) for v in u.controls_w]
            )


def read_units(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        wcols = [i for i, h in enumerate(header) if h.startswith("w")]
        units = []
        for row in reader:
            units.append(
                AnalysisUnit(
                    field_id=row[0],
                    crop_code=row[1] or None,
                    geometry_ref=row[2] or None,
                    treatment=int(row[3]),
                    outcome=float(row[4]),
                    fold=int(row[5]),
                    modifiers_x=tuple(int(row[i]) for i in xcols),
                    controls_w=tuple(float(row[i]) for i in wcols),
                )
            )
    return units

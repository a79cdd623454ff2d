"""CSV parsing, treatment derivation, climate aggregation and the unit join."""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    CLIMATE_VARIABLES,
    DATA_YEARS,
    AnalysisUnit,
    ClimateRecord,
    FieldYearRecord,
    SegmentVocabulary,
    SocRecord,
)
from .exceptions import (
    DuplicateKeyError,
    EmptyResultError,
    InvalidConfigError,
    MalformedRowError,
    MissingClimateYearError,
    MissingColumnError,
)

logger = logging.getLogger(__name__)

LPIS_COLUMNS = ("field_id", "year", "crop_code", "eco", "geometry_ref")
CLIMATE_COLUMNS = ("field_id", "year") + CLIMATE_VARIABLES
SOC_COLUMNS = ("field_id", "soc_pct")

TREATED = "treated"
CONTROL = "control"
EXCLUDED = "excluded"

# Exclusion reasons, in the order assemble() applies them.
MISSING_WINDOW_YEAR = "missing window year"
CROP_CHANGED = "crop changed"
OUTSIDE_TOP_K = "crop outside top-K"
MISSING_CLIMATE = "missing climate"
MISSING_SOC = "missing SOC"
EXCLUSION_REASONS = (MISSING_WINDOW_YEAR, CROP_CHANGED, OUTSIDE_TOP_K, MISSING_CLIMATE, MISSING_SOC)


@dataclass(frozen=True)
class TreatmentWindow:
    years: tuple = (2020, 2021)

    def __post_init__(self):
        years = tuple(int(y) for y in self.years)
        if not years:
            raise InvalidConfigError("treatment window is empty")
        if any(b <= a for a, b in zip(years, years[1:])):
            raise InvalidConfigError(f"treatment window {years} is not strictly increasing")
        object.__setattr__(self, "years", years)

    @classmethod
    def parse(cls, text: str) -> "TreatmentWindow":
        """Build from a comma-separated list such as ``"2020,2021"``."""
        try:
            return cls(tuple(int(t) for t in text.split(",") if t.strip()))
        except ValueError as exc:
            raise InvalidConfigError(f"bad window {text!r}") from exc


@dataclass(frozen=True)
class Assignment:
    status: str
    reason: Optional[str] = None


@dataclass
class AssemblyReport:
    fields_read: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=lambda: {r: 0 for r in EXCLUSION_REASONS})
    excluded_fields: dict = field(default_factory=dict)
    n: int = 0
    n_treated: int = 0
    n_control: int = 0
    per_segment: dict = field(default_factory=dict)

    @property
    def n_excluded(self) -> int:
        return sum(self.excluded.values())

    def exclude(self, field_id: str, reason: str) -> None:
        self.excluded[reason] += 1
        self.excluded_fields[field_id] = reason
        logger.debug("excluded field %s: %s", field_id, reason)

    def to_dict(self) -> dict:
        return {
            "fields_read": dict(self.fields_read),
            "excluded": dict(self.excluded),
            "excluded_fields": dict(sorted(self.excluded_fields.items())),
            "n_excluded": self.n_excluded,
            "n": self.n,
            "n_treated": self.n_treated,
            "n_control": self.n_control,
            "per_segment": dict(self.per_segment),
        }


# --------------------------------------------------------------------------
# CSV parsing


def _read_rows(path, columns):
    """Yield ``(line_no, {column: text})`` for each data row of a CSV."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumnError(path, columns) from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise MissingColumnError(path, missing)
        extra = [h for h in header if h not in columns]
        if extra:
            raise MalformedRowError(path, 1, f"unexpected column(s): {', '.join(extra)}")
        index = {c: header.index(c) for c in columns}
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise MalformedRowError(
                    path, reader.line_num, f"expected {len(header)} fields, got {len(row)}"
                )
            yield reader.line_num, {c: row[i].strip() for c, i in index.items()}


def _parse_int(path, line, name, text):
    try:
        return int(text)
    except ValueError:
        raise MalformedRowError(path, line, f"{name}: not an integer: {text!r}") from None


def _parse_float(path, line, name, text):
    try:
        value = float(text)
    except ValueError:
        raise MalformedRowError(path, line, f"{name}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise MalformedRowError(path, line, f"{name}: not finite")
    return value


def _check_year(path, line, year, allow_any_year):
    lo, hi = DATA_YEARS
    if not allow_any_year and not lo <= year <= hi:
        raise MalformedRowError(path, line, f"year {year} outside [{lo}, {hi}]")


def _require_field_id(path, line, text):
    if not text:
        raise MalformedRowError(path, line, "empty field_id")
    return text


def parse_lpis(path, allow_any_year: bool = False) -> list:
    """Parse LPIS declarations (``field_id,year,crop_code,eco,geometry_ref``)."""
    records, seen = [], set()
    for line, row in _read_rows(path, LPIS_COLUMNS):
        field_id = _require_field_id(path, line, row["field_id"])
        year = _parse_int(path, line, "year", row["year"])
        _check_year(path, line, year, allow_any_year)
        if row["eco"] not in ("0", "1"):
            raise MalformedRowError(path, line, f"eco must be 0 or 1, got {row['eco']!r}")
        if not row["crop_code"]:
            raise MalformedRowError(path, line, "empty crop_code")
        key = (field_id, year)
        if key in seen:
            raise DuplicateKeyError(path, line, key)
        seen.add(key)
        records.append(
            FieldYearRecord(
                field_id=field_id,
                year=year,
                crop_code=row["crop_code"],
                eco_enrolled=row["eco"] == "1",
                geometry_ref=row["geometry_ref"] or None,
            )
        )
    return records


def parse_climate(path, allow_any_year: bool = False) -> list:
    records, seen = [], set()
    for line, row in _read_rows(path, CLIMATE_COLUMNS):
        field_id = _require_field_id(path, line, row["field_id"])
        year = _parse_int(path, line, "year", row["year"])
        _check_year(path, line, year, allow_any_year)
        values = [_parse_float(path, line, c, row[c]) for c in CLIMATE_VARIABLES]
        rec = ClimateRecord(field_id, year, *values)
        problems = rec.violations()
        if problems:
            raise MalformedRowError(path, line, "; ".join(problems))
        key = (field_id, year)
        if key in seen:
            raise DuplicateKeyError(path, line, key)
        seen.add(key)
        records.append(rec)
    return records


def parse_soc(path) -> list:
    records, seen = [], set()
    for line, row in _read_rows(path, SOC_COLUMNS):
        field_id = _require_field_id(path, line, row["field_id"])
        rec = SocRecord(field_id, _parse_float(path, line, "soc_pct", row["soc_pct"]))
        problems = rec.violations()
        if problems:
            raise MalformedRowError(path, line, "; ".join(problems))
        if field_id in seen:
            raise DuplicateKeyError(path, line, field_id)
        seen.add(field_id)
        records.append(rec)
    return records


# --------------------------------------------------------------------------
# Derivation and joins


def derive_treatment(records: Iterable[FieldYearRecord], window: TreatmentWindow) -> dict:
    """Classify each field as treated, control or excluded over ``window``.

    Treated means enrolled in every window year. A field lacking a record
    for any window year is excluded rather than counted as control.
    """
    by_field = defaultdict(dict)
    for r in records:
        by_field[r.field_id][r.year] = r.eco_enrolled
    out = {}
    for field_id, years in by_field.items():
        if any(y not in years for y in window.years):
            out[field_id] = Assignment(EXCLUDED, MISSING_WINDOW_YEAR)
        elif all(years[y] for y in window.years):
            out[field_id] = Assignment(TREATED)
        else:
            out[field_id] = Assignment(CONTROL)
    return out


def aggregate_climate(
    records: Iterable[ClimateRecord],
    window: TreatmentWindow,
    field_ids: Optional[Iterable[str]] = None,
) -> dict:
    """Unweighted mean of each climate variable over the window years.

    Every field in ``field_ids`` (default: every field in ``records``) must
    have a record for each window year.
    """
    by_field = defaultdict(dict)
    for r in records:
        by_field[r.field_id][r.year] = r.values
    targets = sorted(by_field) if field_ids is None else list(field_ids)
    out = {}
    for field_id in targets:
        years = by_field.get(field_id, {})
        rows = []
        for y in window.years:
            if y not in years:
                raise MissingClimateYearError(field_id, y)
            rows.append(years[y])
        out[field_id] = tuple(float(v) for v in np.mean(np.array(rows, dtype=float), axis=0))
    return out


def _window_crop(years: dict, window: TreatmentWindow) -> Optional[str]:
    crops = {years[y].crop_code for y in window.years}
    return crops.pop() if len(crops) == 1 else None


def assemble(
    lpis: Sequence[FieldYearRecord],
    climate: Sequence[ClimateRecord],
    soc: Sequence[SocRecord],
    window: TreatmentWindow = TreatmentWindow(),
    k_segments: int = 3,
):
    """Join the three sources into analysis units.

    Returns ``(units, vocabulary, report)``. Units are sorted by field id and
    carry raw (unscaled) climate means as controls.
    """
    if k_segments < 1:
        raise InvalidConfigError("k_segments must be >= 1")
    lpis_years = {r.year for r in lpis}
    if lpis_years and not (min(lpis_years) <= window.years[0] and window.years[-1] <= max(lpis_years)):
        raise InvalidConfigError(
            f"window {window.years} outside data years [{min(lpis_years)}, {max(lpis_years)}]"
        )

    by_field = defaultdict(dict)
    for r in lpis:
        by_field[r.field_id][r.year] = r
    climate_years = defaultdict(set)
    for c in climate:
        climate_years[c.field_id].add(c.year)
    soc_by_field = {s.field_id: s.soc_pct for s in soc}

    report = AssemblyReport(
        fields_read={"lpis": len(by_field), "climate": len(climate_years), "soc": len(soc_by_field)}
    )
    assignment = derive_treatment(lpis, window)

    stable = {}
    for field_id in sorted(by_field):
        if assignment[field_id].status == EXCLUDED:
            report.exclude(field_id, assignment[field_id].reason)
            continue
        crop = _window_crop(by_field[field_id], window)
        if crop is None:
            report.exclude(field_id, CROP_CHANGED)
            continue
        stable[field_id] = crop

    vocabulary = SegmentVocabulary.from_crops(stable.values(), k_segments)

    keep = []
    for field_id, crop in stable.items():
        if crop not in vocabulary:
            report.exclude(field_id, OUTSIDE_TOP_K)
        elif any(y not in climate_years.get(field_id, ()) for y in window.years):
            report.exclude(field_id, MISSING_CLIMATE)
        elif field_id not in soc_by_field:
            report.exclude(field_id, MISSING_SOC)
        else:
            keep.append(field_id)

    if not keep:
        raise EmptyResultError("no analysis units survived assembly")

    means = aggregate_climate(climate, window, keep)
    k = len(vocabulary)
    units = []
    for field_id in keep:
        crop = stable[field_id]
        x = [0] * k
        x[vocabulary.index(crop)] = 1
        last = by_field[field_id][window.years[-1]]
        units.append(
            AnalysisUnit(
                field_id=field_id,
                treatment=1 if assignment[field_id].status == TREATED else 0,
                outcome=soc_by_field[field_id],
                modifiers_x=tuple(x),
                controls_w=means[field_id],
                crop_code=crop,
                geometry_ref=last.geometry_ref,
            )
        )

    report.n = len(units)
    report.n_treated = sum(u.treatment for u in units)
    report.n_control = report.n - report.n_treated
    for code in vocabulary.codes:
        seg = [u for u in units if u.crop_code == code]
        report.per_segment[code] = {
            "n": len(seg),
            "n_treated": sum(u.treatment for u in seg),
            "n_control": sum(1 - u.treatment for u in seg),
        }
    return units, vocabulary, report


def load_sources(lpis_path, climate_path, soc_path, allow_any_year: bool = False):
    """Parse the three source files."""
    return (
        parse_lpis(lpis_path, allow_any_year),
        parse_climate(climate_path, allow_any_year),
        parse_soc(soc_path),
    )

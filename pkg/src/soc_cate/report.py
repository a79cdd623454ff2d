"""Text table and GeoJSON map output for CATE reports."""
from __future__ import annotations

import bisect
import json
import logging
import math
from decimal import ROUND_HALF_EVEN, Decimal

from .dml.final_stage import DmlFit, cate_for, featurize
from .dml.inference import CateReport
from .dml.stats import critical_value
from .exceptions import InvalidGeometryError

logger = logging.getLogger(__name__)

TABLE_ROWS = (
    ("Point Estimate", "point"),
    ("Standard Error", "std_error"),
    ("Z-score", "z_score"),
    ("P-value", "p_value"),
    ("95% CI (Lower)", "ci_low"),
    ("95% CI (Higher)", "ci_high"),
)
N_BUCKETS = 5


def format_2dp(value: float) -> str:
    """Two decimals, half-to-even on the shortest decimal form of ``value``."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    d = Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)
    if d == 0:
        d = abs(d)
    return f"{d:.2f}"


def render_table(report: CateReport) -> str:
    """Segments as columns, the six inference rows as rows."""
    segs = report.segments
    level = round(report.confidence * 100)
    labels = [label.replace("95%", f"{level}%") for label, _ in TABLE_ROWS]
    cells = [[format_2dp(getattr(s, attr)) for s in segs] for _, attr in TABLE_ROWS]
    label_w = max(len(x) for x in labels + ["Crops"])
    col_w = max([len(s.crop_code) for s in segs] + [len(c) for row in cells for c in row] + [5])

    def line(label, values):
        return label.ljust(label_w) + "".join("  " + v.rjust(col_w) for v in values)

    title = "Conditional Average Treatment Effects"
    body = [line("Crops", [s.crop_code for s in segs])]
    body += [line(label, row) for label, row in zip(labels, cells)]
    width = max(len(b) for b in body)
    out = [title.center(width).rstrip(), "-" * width, body[0], "-" * width, *body[1:], "-" * width]
    if any(s.std_error == 0 and s.point != 0 for s in segs):
        out.append("* zero standard error with nonzero estimate: z reported as inf, p as 0.00")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# GeoJSON


def _check_ring(ring):
    if not isinstance(ring, list) or len(ring) < 4:
        raise InvalidGeometryError("polygon ring needs at least 4 positions")
    for pos in ring:
        if not isinstance(pos, (list, tuple)) or len(pos) < 2 or not all(
            isinstance(c, (int, float)) and math.isfinite(c) for c in pos
        ):
            raise InvalidGeometryError(f"bad position {pos!r}")
    if list(ring[0]) != list(ring[-1]):
        raise InvalidGeometryError("polygon ring is not closed")


def check_geometry(geom) -> dict:
    if not isinstance(geom, dict) or "type" not in geom or "coordinates" not in geom:
        raise InvalidGeometryError("geometry needs 'type' and 'coordinates'")
    if geom["type"] == "Polygon":
        polys = [geom["coordinates"]]
    elif geom["type"] == "MultiPolygon":
        polys = geom["coordinates"]
    else:
        raise InvalidGeometryError(f"unsupported geometry type {geom['type']!r}")
    for poly in polys:
        if not isinstance(poly, list) or not poly:
            raise InvalidGeometryError("polygon without rings")
        for ring in poly:
            _check_ring(ring)
    return geom


def load_geometry(path) -> dict:
    """Map ``geometry_ref`` to geometry from a GeoJSON FeatureCollection.

    The key is the feature's ``properties.geometry_ref`` if present, else its
    ``id``.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("type") != "FeatureCollection":
        raise InvalidGeometryError(f"{path}: not a FeatureCollection")
    out = {}
    for feat in data.get("features", []):
        props = feat.get("properties") or {}
        key = props.get("geometry_ref", feat.get("id"))
        if key is None:
            continue
        out[str(key)] = feat.get("geometry")
    return out


def color_buckets(values) -> list:
    """Quintile bucket 1..5 of each value, 5 = largest.

    Tied values share the bucket of their lowest rank.
    """
    m = len(values)
    ordered = sorted(values)
    buckets = []
    for v in values:
        rank = bisect.bisect_left(ordered, v)
        buckets.append(1 + (N_BUCKETS * rank) // m)
    return buckets


def emit_geojson(units, fit: DmlFit, geometry_source: dict, confidence: float = 0.95):
    """Build a FeatureCollection with one polygon per unit that has geometry.

    Returns ``(collection, n_skipped)``.
    """
    q = critical_value(confidence)
    names = list(fit.segment_names)

    mapped, skipped = [], 0
    for u in units:
        geom = geometry_source.get(u.geometry_ref) if u.geometry_ref else None
        if geom is None:
            skipped += 1
            continue
        mapped.append((u, check_geometry(geom)))
    if skipped:
        logger.warning("%d unit(s) without geometry skipped", skipped)

    points = [cate_for(fit, u.modifiers_x) for u, _ in mapped]
    buckets = color_buckets(points) if points else []
    features = []
    for (u, geom), point, bucket in zip(mapped, points, buckets):
        c = featurize([u.modifiers_x], fit.fit_intercept)[0]
        se = math.sqrt(max(float(c @ fit.covariance @ c), 0.0))
        lo, hi = point - q * se, point + q * se
        features.append({
            "type": "Feature",
            "geometry": geom,
            "properties": {
                "field_id": u.field_id,
                "crop_code": u.crop_code or names[list(u.modifiers_x).index(1)],
                "cate_point": point,
                "cate_ci_low": lo,
                "cate_ci_high": hi,
                "significant": bool(lo > 0 or hi < 0),
                "color_bucket": bucket,
            },
        })
    return {"type": "FeatureCollection", "features": features}, skipped

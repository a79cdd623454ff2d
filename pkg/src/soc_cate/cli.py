"""Command-line entry point: ``soc-cate <subcommand> [options]``.

Exit codes: 0 success, 1 data/validation error, 2 estimation failure,
3 I/O error.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from . import __version__
from .core import read_units, write_units
from .dml import DmlConfig, DmlFit, CateReport, estimate
from .exceptions import DataError, EstimationError, InvalidConfigError
from .ingest import TreatmentWindow, assemble, load_sources, parse_climate, parse_lpis, parse_soc
from .learners import LearnerSpec
from .preprocessing import fit_scaler, scale_units
from .report import emit_geojson, load_geometry, render_table
from .synth import DgpConfig, write_dataset

logger = logging.getLogger("soc_cate")

EXIT_OK, EXIT_DATA, EXIT_ESTIMATION, EXIT_IO = 0, 1, 2, 3
LOCK_NAME = ".soc_cate.lock"


@dataclass
class RunConfig:
    lpis: Optional[str] = None
    climate: Optional[str] = None
    soc: Optional[str] = None
    geometry: Optional[str] = None
    window: str = "2020,2021"
    segments: int = 3
    folds: int = 5
    seed: int = 0
    confidence: float = 0.95
    out: str = "out"
    scale_per_fold: bool = False
    learner: str = "rf"
    n_trees: int = 200
    min_samples_leaf: int = 5
    covariance: str = "HC0"
    n_jobs: int = 1
    allow_any_year: bool = False
    n: int = 2000

    def validate(self):
        if not 0 < self.confidence < 1:
            raise InvalidConfigError("confidence must lie in (0, 1)")
        if self.learner not in ("rf", "linear"):
            raise InvalidConfigError("learner must be 'rf' or 'linear'")
        TreatmentWindow.parse(self.window)

    def dml_config(self) -> DmlConfig:
        if self.learner == "rf":
            common = dict(n_trees=self.n_trees, min_samples_leaf=self.min_samples_leaf,
                          seed=self.seed, n_jobs=self.n_jobs)
            reg = LearnerSpec("rf_regressor", **common)
            clf = LearnerSpec("rf_classifier", **common)
        else:
            reg = LearnerSpec("ridge_regressor", seed=self.seed)
            clf = LearnerSpec("logistic_classifier", seed=self.seed)
        return DmlConfig(
            folds=self.folds,
            seed=self.seed,
            confidence=self.confidence,
            covariance_type=self.covariance,
            scale_per_fold=self.scale_per_fold,
            n_jobs=self.n_jobs,
            regressor=reg,
            classifier=clf,
        )

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    common.add_argument("--lpis")
    common.add_argument("--climate")
    common.add_argument("--soc")
    common.add_argument("--geometry", help="GeoJSON FeatureCollection keyed by geometry_ref")
    common.add_argument("--window", help="comma-separated treatment years, e.g. 2020,2021")
    common.add_argument("--segments", type=int, help="number of crop segments (top-K)")
    common.add_argument("--folds", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--confidence", type=float)
    common.add_argument("--out", help="output directory")
    common.add_argument("--scale-per-fold", dest="scale_per_fold", action="store_const", const=True)
    common.add_argument("--learner", choices=["rf", "linear"])
    common.add_argument("--n-trees", dest="n_trees", type=int)
    common.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)
    common.add_argument("--covariance", choices=["HC0", "HC1"])
    common.add_argument("--n-jobs", dest="n_jobs", type=int)
    common.add_argument("--allow-any-year", dest="allow_any_year", action="store_const", const=True)
    common.add_argument("--n", type=int, help="units to simulate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="soc-cate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the input CSVs only")
    sub.add_parser("ingest", parents=[common], help="assemble analysis units")
    sub.add_parser("estimate", parents=[common], help="run the full pipeline")
    sub.add_parser("report", parents=[common], help="re-render table/map from an estimate run")
    sub.add_parser("simulate", parents=[common], help="write synthetic input files")
    return parser


def resolve_config(args) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        known = {f.name for f in fields(RunConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


@contextlib.contextmanager
def output_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(FileNotFoundError):
            lock.unlink()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_manifest(out: Path, cfg: RunConfig, command: str, files) -> None:
    _write_json(out / "manifest.json", {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "config": asdict(cfg),
        "files": sorted(files),
    })


def _require_sources(cfg):
    missing = [k for k in ("lpis", "climate", "soc") if not getattr(cfg, k)]
    if missing:
        raise InvalidConfigError(f"missing input path(s): {', '.join('--' + m for m in missing)}")


def _assemble(cfg):
    _require_sources(cfg)
    lpis, climate, soc = load_sources(cfg.lpis, cfg.climate, cfg.soc, cfg.allow_any_year)
    return assemble(lpis, climate, soc, TreatmentWindow.parse(cfg.window), cfg.segments)


def cmd_validate(cfg, out):
    if not any((cfg.lpis, cfg.climate, cfg.soc)):
        raise InvalidConfigError("nothing to validate; pass --lpis/--climate/--soc")
    if cfg.lpis:
        print(f"lpis: {len(parse_lpis(cfg.lpis, cfg.allow_any_year))} rows ok")
    if cfg.climate:
        print(f"climate: {len(parse_climate(cfg.climate, cfg.allow_any_year))} rows ok")
    if cfg.soc:
        print(f"soc: {len(parse_soc(cfg.soc))} rows ok")
    return []


def cmd_ingest(cfg, out):
    units, vocab, report = _assemble(cfg)
    write_units(out / "units.csv", units)
    _write_json(out / "vocabulary.json", vocab.to_dict())
    _write_json(out / "assembly_report.json", report.to_dict())
    print(f"{report.n} units ({report.n_treated} treated, {report.n_control} control); "
          f"{report.n_excluded} field(s) excluded")
    return ["units.csv", "vocabulary.json", "assembly_report.json"]


def _write_outputs(out, units, fit, report, cfg):
    files = []
    _write_json(out / "cate_report.json", report.to_dict())
    _write_json(out / "dml_fit.json", fit.to_dict())
    (out / "table.txt").write_text(render_table(report), encoding="utf-8")
    files += ["cate_report.json", "dml_fit.json", "table.txt"]
    if cfg.geometry:
        collection, skipped = emit_geojson(units, fit, load_geometry(cfg.geometry), cfg.confidence)
        if skipped:
            print(f"warning: {skipped} unit(s) without geometry skipped", file=sys.stderr)
        _write_json(out / "map.geojson", collection)
        files.append("map.geojson")
    return files


def cmd_estimate(cfg, out):
    units, vocab, assembly = _assemble(cfg)
    files = []
    if not cfg.scale_per_fold:
        params = fit_scaler([u.controls_w for u in units])
        (out / "scaler.json").write_text(params.to_json() + "\n", encoding="utf-8")
        units = scale_units(units, params)
        files.append("scaler.json")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit, report, diagnostics = estimate(units, cfg.dml_config(), segment_names=vocab.codes)
    for note in report.warnings:
        print(f"warning: {note}", file=sys.stderr)
    write_units(out / "units.csv", units)
    _write_json(out / "assembly_report.json", assembly.to_dict())
    files += ["units.csv", "assembly_report.json"]
    files += _write_outputs(out, units, fit, report, cfg)
    sys.stdout.write(render_table(report))
    return files


def cmd_report(cfg, out):
    report = CateReport.from_dict(json.loads((out / "cate_report.json").read_text(encoding="utf-8")))
    (out / "table.txt").write_text(render_table(report), encoding="utf-8")
    files = ["table.txt"]
    if cfg.geometry:
        fit = DmlFit.from_dict(json.loads((out / "dml_fit.json").read_text(encoding="utf-8")))
        units = read_units(out / "units.csv")
        collection, _ = emit_geojson(units, fit, load_geometry(cfg.geometry), report.confidence)
        _write_json(out / "map.geojson", collection)
        files.append("map.geojson")
    sys.stdout.write(render_table(report))
    return files


def cmd_simulate(cfg, out):
    paths = write_dataset(DgpConfig(n=cfg.n, seed=cfg.seed), out)
    print(f"wrote {cfg.n} synthetic fields to {out}")
    return [Path(p).name for p in paths.values()]


COMMANDS = {
    "validate": cmd_validate,
    "ingest": cmd_ingest,
    "estimate": cmd_estimate,
    "report": cmd_report,
    "simulate": cmd_simulate,
}


def run(cfg: RunConfig, command: str) -> int:
    """Execute ``command`` and return its exit code."""
    try:
        out = Path(cfg.out)
        if command == "validate":
            COMMANDS[command](cfg, out)
            return EXIT_OK
        with output_lock(out):
            files = COMMANDS[command](cfg, out)
            _write_manifest(out, cfg, command, files)
        return EXIT_OK
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except FileExistsError:
        print(f"error: output directory {cfg.out} is locked by another run", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error reading config: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc, json.JSONDecodeError) else EXIT_IO
    return run(cfg, args.command)


if __name__ == "__main__":
    sys.exit(main())

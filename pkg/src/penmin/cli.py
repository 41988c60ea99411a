"""Command-line interface.

Subcommands: ``path`` (one dataset -> selection-path CSV), ``calibrate``
(dataset -> calibration JSON), ``simulate`` (config -> report files),
``verify-theorem`` (config -> verdict, exit 2 on FAIL), ``svt``
(config -> threshold-comparison CSV).  The PENMIN_LOG environment variable
sets the log level (debug/info/warning).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import c_hat_jump, c_hat_jump_merged, c_hat_slope, c_hat_window, select_final
from .harness import ExperimentConfig, emit_report, run_experiment, verify_theorem
from .models import collection_from_config, emp_risks
from .noise import covariance, from_config as noise_from_config
from .path import PenaltyShape, compute_path, path_to_csv
from .svt import SvtConfig, svt_experiment

logger = logging.getLogger("penmin")


def _setup_logging():
    level = os.environ.get("PENMIN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _load_dataset(config: dict):
    """Collection, observations, and penalty shape from a dataset config."""
    n = int(config["n"])
    coll_cfg = dict(config["collection"])
    if coll_cfg.get("kind") == "regressogram" and "models" not in coll_cfg:
        from .models import regressogram_collection

        collection = regressogram_collection(n, coll_cfg["piece_counts"])
    else:
        coll_cfg.setdefault("n", n)
        collection = collection_from_config(coll_cfg)
    if "y" in config:
        y = np.asarray(config["y"], dtype=float)
    else:
        y = np.load(Path(config["y_path"]))
    shape_cfg = config.get("shape", {"kind": "dimension"})
    if shape_cfg["kind"] == "dimension":
        shape = PenaltyShape.dimension(collection)
    elif shape_cfg["kind"] == "covariance":
        spec = noise_from_config(shape_cfg["noise"], n)
        shape = PenaltyShape.covariance(collection, covariance(spec, n))
    else:
        raise ValueError(f"unknown shape kind {shape_cfg['kind']!r}")
    return collection, y, shape


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_path(args) -> int:
    config = _load_json(args.config)
    collection, y, shape = _load_dataset(config)
    risks = emp_risks(collection, y)
    path = compute_path(risks, shape)
    csv_text = path_to_csv(path, collection.dims())
    out = _out_dir(args) / "path.csv"
    out.write_text(csv_text)
    print(out)
    return 0


def _cmd_calibrate(args) -> int:
    config = _load_json(args.config)
    collection, y, shape = _load_dataset(config)
    risks = emp_risks(collection, y)
    path = compute_path(risks, shape)
    dims = collection.dims()
    cal = config.get("calibrator", {"method": "jump"})
    method = cal.get("method", "jump")
    if method == "jump":
        result = c_hat_jump(path, dims)
    elif method == "jump_merged":
        result = c_hat_jump_merged(path, dims, float(cal.get("delta_rel", 0.05)))
    elif method == "window":
        result = c_hat_window(path, dims, float(cal.get("frac_high", 0.9)),
                              float(cal.get("frac_low", 0.1)))
    elif method == "slope":
        result = c_hat_slope(risks, shape, float(cal.get("region_frac", 0.4)),
                             bool(cal.get("robust", False)))
    else:
        raise ValueError(f"unknown calibrator method {method!r}")
    payload = result.to_dict()
    if result.ok:
        payload["selected"] = select_final(risks, shape, result, float(config.get("factor", 2.0)))
    out_dir = _out_dir(args)
    out = out_dir / "calibration.json"
    out.write_text(json.dumps(payload, indent=2))
    print(out)
    formats = set(args.format.split(",")) if args.format else {"json"}
    if "csv" in formats or "svg" in formats:
        for p in _emit_calibration_plots(out_dir, path, risks, shape, dims, formats):
            print(p)
    return 0


def _emit_calibration_plots(out_dir, path, risks, shape, dims, formats):
    import csv as _csv

    from .path import complexity_path

    written = []
    step = complexity_path(path, dims)
    bounds = [0.0, *path.breakpoints.tolist(), "inf"]
    if "csv" in formats:
        p = out_dir / "complexity_path.csv"
        with open(p, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["C_low", "C_high", "complexity"])
            for j, v in enumerate(step.values):
                writer.writerow([bounds[j], bounds[j + 1], v])
        written.append(p)
        p = out_dir / "risk_vs_weight.csv"
        with open(p, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["model_id", "weight", "emp_risk"])
            for mid in sorted(risks):
                writer.writerow([mid, shape[mid], risks[mid]])
        written.append(p)
    if "svg" in formats:
        from . import plots

        exemplar = {
            "weights": dict(shape.weights),
            "emp_risks": dict(risks),
            "dims": dict(dims),
            "segments": [
                {"c_low": bounds[j], "c_high": bounds[j + 1],
                 "model_id": s.model_id, "dim": dims[s.model_id],
                 "emp_risk": s.intercept}
                for j, s in enumerate(path.segments)
            ],
        }
        written.append(plots.plot_complexity_path(exemplar, out_dir / "complexity_path.svg"))
        written.append(plots.plot_risk_vs_weight(exemplar, out_dir / "risk_vs_weight.svg"))
    return written


def _experiment_config(args) -> ExperimentConfig:
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.replicates is not None:
        raw["replicates"] = args.replicates
    return ExperimentConfig.from_dict(raw)


def _cmd_simulate(args) -> int:
    config = _experiment_config(args)
    report = run_experiment(config, jobs=args.jobs)
    formats = args.format.split(",") if args.format else ["json"]
    for p in emit_report(report, args.out or config.out_dir, formats):
        print(p)
    return 0


def _cmd_verify_theorem(args) -> int:
    config = _experiment_config(args)
    report = run_experiment(config, jobs=args.jobs)
    verdict = verify_theorem(report)
    out = Path(args.out or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verdict.json").write_text(json.dumps(verdict, indent=2))
    print(json.dumps(verdict, indent=2))
    return 2 if verdict["verdict"] == "FAIL" else 0


def _cmd_svt(args) -> int:
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.replicates is not None:
        raw["replicates"] = args.replicates
    raw["signal_singular_values"] = tuple(raw["signal_singular_values"])
    config = SvtConfig(**raw)
    report = svt_experiment(config)
    out = _out_dir(args) / "svt.csv"
    out.write_text(report.to_csv())
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penmin",
        description="Minimal-penalty calibration and phase-transition experiments",
    )
    parser.add_argument("--version", action="version", version=f"penmin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_jobs=False):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--replicates", type=int, default=None, help="override replicates")
        if with_jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("path", help="compute one dataset's selection path")
    common(p)
    p.set_defaults(func=_cmd_path)

    p = sub.add_parser("calibrate", help="estimate C_hat on one dataset")
    common(p)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("simulate", help="run a replicated experiment")
    common(p, with_jobs=True)
    p.add_argument("--format", default="json", help="comma-separated: json,csv,svg")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify-theorem", help="check the phase-transition bound")
    common(p, with_jobs=True)
    p.set_defaults(func=_cmd_verify_theorem)

    p = sub.add_parser("svt", help="singular-value threshold comparison")
    common(p)
    p.set_defaults(func=_cmd_svt)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

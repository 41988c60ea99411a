"""Experiment orchestration: configs, replicated simulations, theorem checks.

A run draws ``replicates`` datasets Y = F + eps (replicate r uses the
stream (seed, r), so results are independent of execution order and of the
number of workers), fits every model, computes the exact selection path,
runs the configured calibrators, selects final models, and evaluates the
phase-transition event at two penalty constants: either fixed values or the
proof thresholds at x = gamma * log(n).

Regressogram collections are evaluated through cumulative-sum block
arithmetic, which keeps large-n runs (needed for a non-vacuous theorem
band) cheap; the dense-basis route is reserved for small instances and
cross-checked against the fast one in the tests.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .calibrate import (
    CalibrationResult,
    c_hat_jump,
    c_hat_jump_merged,
    c_hat_slope,
    c_hat_window,
    select_final,
)
from .models import (
    blockwise_project,
    regressogram_edges,
    regressogram_emp_risks,
    regressogram_id,
)
from .noise import NoiseSpec, RngStream, from_config as noise_from_config
from .path import PenaltyShape, SelectionPath, complexity_path, compute_path, select_at
from .theory import TheoremConstants, constants_from_profile, proof_thresholds

logger = logging.getLogger("penmin")

SIGNAL_STREAM_ID = 2**40  # reserved stream: replicate streams are 0..replicates-1

_CALIBRATOR_NAMES = ("jump", "jump_merged", "window", "slope")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one simulation study; JSON round-trippable."""

    scenario: str
    n: int
    piece_counts: tuple[int, ...]
    signal: dict = field(default_factory=lambda: {"kind": "zero"})
    noise: dict = field(default_factory=lambda: {"kind": "iid", "sigma2": 1.0})
    shape: str = "dimension"
    gamma: float = 1.0
    calibrators: dict = field(default_factory=lambda: {"jump": {}})
    factor: float = 2.0
    replicates: int = 100
    seed: int = 0
    theorem_check: dict | None = None  # {"mode": "fixed", "c_low":…, "c_high":…} | {"mode": "proof_thresholds"}
    exhaustive_theorem: bool = False
    out_dir: str = "out"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        counts = tuple(int(k) for k in self.piece_counts)
        if not counts or any(k2 <= k1 for k1, k2 in zip(counts, counts[1:])):
            raise ValueError("piece_counts must be non-empty and strictly increasing")
        if counts[0] < 1 or counts[-1] > self.n:
            raise ValueError("piece counts must lie in [1, n]")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.shape not in ("dimension", "covariance"):
            raise ValueError("shape must be 'dimension' or 'covariance'")
        if not self.factor > 0:
            raise ValueError("factor must be > 0")
        unknown = set(self.calibrators) - set(_CALIBRATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown calibrators: {sorted(unknown)}")
        object.__setattr__(self, "piece_counts", counts)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["piece_counts"] = list(self.piece_counts)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        d = dict(d)
        d["piece_counts"] = tuple(d["piece_counts"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def build_signal(config: ExperimentConfig) -> np.ndarray:
    """The deterministic true mean F described by the config."""
    n = config.n
    spec = config.signal
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return np.zeros(n)
    if kind == "in_span":
        # piecewise constant on `pieces` blocks: alternating +/- amplitude
        pieces = int(spec["pieces"])
        amp = float(spec.get("amplitude", 1.0))
        edges = regressogram_edges(n, pieces)
        f = np.empty(n)
        for j in range(pieces):
            f[edges[j]:edges[j + 1]] = amp if j % 2 == 0 else -amp
        return f
    if kind == "piecewise_biased":
        # in-span part plus a full-dimensional component of given norm^2/n
        base = build_signal(
            ExperimentConfig(
                scenario=config.scenario, n=n, piece_counts=config.piece_counts,
                signal={"kind": "in_span", "pieces": spec["pieces"],
                        "amplitude": spec.get("amplitude", 1.0)},
            )
        )
        norm2 = float(spec.get("full_dim_norm2", 0.01))
        g = RngStream(config.seed, SIGNAL_STREAM_ID).generator().standard_normal(n)
        g *= math.sqrt(norm2 * n) / np.linalg.norm(g)
        return base + g
    if kind == "alternating":
        # sign-alternating vector, orthogonal to every even-block regressogram
        norm2 = float(spec.get("norm2", 0.01))
        f = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        return f * math.sqrt(norm2)
    raise ValueError(f"unknown signal kind {kind!r}")


def build_noise(config: ExperimentConfig) -> NoiseSpec:
    return noise_from_config(config.noise, config.n)


class _RegressogramEngine:
    """Cumsum-based evaluation of a regressogram collection (no dense bases)."""

    def __init__(self, n: int, piece_counts: Sequence[int]):
        self.n = n
        self.piece_counts = list(piece_counts)
        self.ids = [regressogram_id(k) for k in self.piece_counts]
        self.dims = {regressogram_id(k): k for k in self.piece_counts}
        self._edges = {regressogram_id(k): regressogram_edges(n, k) for k in self.piece_counts}

    def emp_risks(self, y: np.ndarray) -> dict[str, float]:
        return regressogram_emp_risks(y, self.piece_counts)

    def project(self, model_id: str, y: np.ndarray) -> np.ndarray:
        return blockwise_project(y, self._edges[model_id])

    def true_risk(self, model_id: str, y: np.ndarray, f: np.ndarray) -> float:
        diff = self.project(model_id, y) - f
        return float(diff @ diff) / self.n

    def biases(self, f: np.ndarray) -> dict[str, float]:
        return self.emp_risks(f)

    def shape(self, kind: str, sigma: np.ndarray | None) -> PenaltyShape:
        if kind == "dimension":
            return PenaltyShape.from_dims(self.dims, self.n)
        weights = {}
        for mid, edges in self._edges.items():
            tr = 0.0
            for j in range(edges.size - 1):
                lo, hi = edges[j], edges[j + 1]
                tr += float(np.sum(sigma[lo:hi, lo:hi])) / (hi - lo)
            weights[mid] = tr / self.n
        return PenaltyShape(weights)


def _oracle(engine: _RegressogramEngine, y: np.ndarray, f: np.ndarray) -> tuple[str, float]:
    best = None
    for mid in engine.ids:
        risk = engine.true_risk(mid, y, f)
        key = (risk, engine.dims[mid], mid)
        if best is None or key < best[0]:
            best = (key, mid, risk)
    return best[1], best[2]


def _run_calibrators(
    config: ExperimentConfig,
    emp_risks: Mapping[str, float],
    shape: PenaltyShape,
    path: SelectionPath,
    dims: Mapping[str, int],
) -> dict[str, CalibrationResult]:
    results = {}
    for name, params in config.calibrators.items():
        if name == "jump":
            results[name] = c_hat_jump(path, dims)
        elif name == "jump_merged":
            results[name] = c_hat_jump_merged(path, dims, float(params.get("delta_rel", 0.05)))
        elif name == "window":
            results[name] = c_hat_window(
                path, dims,
                float(params.get("frac_high", 0.9)), float(params.get("frac_low", 0.1)),
            )
        elif name == "slope":
            results[name] = c_hat_slope(
                emp_risks, shape,
                float(params.get("region_frac", 0.4)), bool(params.get("robust", False)),
            )
    return results


def _theorem_setup(config: ExperimentConfig, f: np.ndarray, engine: _RegressogramEngine):
    """Constants and the two check constants (c_low, c_high), or reasons why not."""
    if config.noise.get("kind") != "iid":
        return None, None, "theorem check requires iid noise"
    sigma2 = float(config.noise["sigma2"])
    try:
        constants = constants_from_profile(
            engine.dims, engine.biases(f), config.n, sigma2, config.gamma
        )
    except ValueError as exc:
        return None, None, str(exc)
    check = config.theorem_check or {"mode": "proof_thresholds"}
    if check["mode"] == "fixed":
        c_low, c_high = float(check["c_low"]), float(check["c_high"])
    elif check["mode"] == "proof_thresholds":
        x = config.gamma * math.log(config.n)
        c_low, c_high = proof_thresholds(constants, sigma2, x)
    else:
        raise ValueError(f"unknown theorem_check mode {check['mode']!r}")
    if c_low < 0:
        return constants, None, "lower check constant is negative (vacuous band)"
    return constants, (c_low, c_high), None


def _theorem_event(
    path: SelectionPath,
    dims: Mapping[str, int],
    c_low: float,
    c_high: float,
    d_m1: int,
    exhaustive: bool,
) -> tuple[bool, int, int]:
    step = complexity_path(path, dims)
    d_at_low = int(step(c_low))
    d_at_high = int(step(c_high))
    ok = d_at_low >= 0.9 * d_m1 and d_at_high <= 0.1 * d_m1
    if exhaustive and ok:
        # sweep every segment: those meeting [0, c_low] must stay huge, those
        # meeting [c_high, inf) must stay small
        bounds = [0.0, *path.breakpoints.tolist(), math.inf]
        for j, seg in enumerate(path.segments):
            lo, hi = bounds[j], bounds[j + 1]
            if lo < c_low and dims[seg.model_id] < 0.9 * d_m1:
                ok = False
            if hi > c_high and dims[seg.model_id] > 0.1 * d_m1:
                ok = False
    return ok, d_at_low, d_at_high


def _replicate_record(
    config: ExperimentConfig,
    engine: _RegressogramEngine,
    f: np.ndarray,
    noise_spec: NoiseSpec,
    shape: PenaltyShape,
    check_cs: tuple[float, float] | None,
    d_m1: int | None,
    r: int,
) -> tuple[dict, dict]:
    from .noise import generate_sample

    y = generate_sample(f, noise_spec, RngStream(config.seed, r))
    risks = engine.emp_risks(y)
    path = compute_path(risks, shape)
    dims = engine.dims
    calibrations = _run_calibrators(config, risks, shape, path, dims)
    oracle_id, oracle_risk = _oracle(engine, y, f)

    record = {
        "replicate": r,
        "c_hat": {},
        "selected": {},
        "selected_risk": {},
        "oracle": oracle_id,
        "oracle_risk": oracle_risk,
        "calibration_warnings": {},
        "path_summary": {
            "n_segments": len(path.segments),
            "c_first": float(path.breakpoints[0]) if path.breakpoints.size else None,
            "c_last": float(path.breakpoints[-1]) if path.breakpoints.size else None,
        },
    }
    for name, result in calibrations.items():
        record["c_hat"][name] = result.c_hat
        record["calibration_warnings"][name] = list(result.warnings)
        if result.ok:
            selected = select_final(risks, shape, result, config.factor)
            record["selected"][name] = selected
            record["selected_risk"][name] = engine.true_risk(selected, y, f)
        else:
            record["selected"][name] = None
            record["selected_risk"][name] = None
    if check_cs is not None:
        ok, d_lo, d_hi = _theorem_event(
            path, dims, check_cs[0], check_cs[1], d_m1, config.exhaustive_theorem
        )
        record["theorem_event"] = bool(ok)
        record["dim_at_c_low"] = d_lo
        record["dim_at_c_high"] = d_hi
    else:
        record["theorem_event"] = None
        record["dim_at_c_low"] = None
        record["dim_at_c_high"] = None

    exemplar = {}
    if r == 0:
        bounds = [0.0, *path.breakpoints.tolist()]
        exemplar = {
            "emp_risks": risks,
            "weights": dict(shape.weights),
            "dims": dict(dims),
            "segments": [
                {"c_low": bounds[j], "c_high": (bounds[j + 1] if j + 1 < len(bounds) else "inf"),
                 "model_id": s.model_id, "dim": dims[s.model_id], "emp_risk": s.intercept}
                for j, s in enumerate(path.segments)
            ],
        }
    return record, exemplar


@dataclass(frozen=True)
class ExperimentReport:
    """Everything a run produced; JSON round-trippable and bit-reproducible."""

    config: dict
    constants: dict | None
    theorem: dict | None
    records: tuple[dict, ...]
    aggregates: dict
    exemplar: dict
    meta: dict

    def to_dict(self) -> dict:
        d = asdict(self)
        d["records"] = list(self.records)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentReport":
        d = dict(d)
        d["records"] = tuple(d["records"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))


def _quantiles(values: Sequence[float]) -> dict:
    if not values:
        return {}
    arr = np.array(values)
    qs = np.quantile(arr, [0.1, 0.25, 0.5, 0.75, 0.9])
    return {
        "mean": float(arr.mean()),
        "q10": float(qs[0]),
        "q25": float(qs[1]),
        "q50": float(qs[2]),
        "q75": float(qs[3]),
        "q90": float(qs[4]),
    }


def compute_aggregates(records: Sequence[Mapping]) -> dict:
    """Summaries recomputable from the per-replicate records."""
    agg: dict = {"replicates": len(records)}
    events = [r["theorem_event"] for r in records if r["theorem_event"] is not None]
    agg["theorem"] = {
        "evaluated": len(events),
        "successes": int(sum(events)),
        "frequency": (sum(events) / len(events)) if events else None,
    }
    methods = sorted({name for r in records for name in r["c_hat"]})
    agg["calibrators"] = {}
    for name in methods:
        c_hats = [r["c_hat"][name] for r in records if r["c_hat"][name] is not None]
        ratios = []
        for r in records:
            risk = r["selected_risk"].get(name)
            if risk is not None and r["oracle_risk"] > 0:
                ratios.append(risk / r["oracle_risk"])
        agg["calibrators"][name] = {
            "failures": sum(1 for r in records if r["c_hat"][name] is None),
            "c_hat": _quantiles(c_hats),
            "oracle_ratio": _quantiles(ratios),
            "oracle_ratio_le_1_5": (
                float(np.mean([x <= 1.5 for x in ratios])) if ratios else None
            ),
        }
    return agg


def _run_chunk(config_dict: dict, replicate_range: tuple[int, int]) -> tuple[list[dict], dict]:
    config = ExperimentConfig.from_dict(config_dict)
    engine = _RegressogramEngine(config.n, config.piece_counts)
    f = build_signal(config)
    noise_spec = build_noise(config)
    sigma = None
    if config.shape == "covariance":
        from .noise import covariance

        sigma = covariance(noise_spec, config.n)
    shape = engine.shape(config.shape, sigma)
    constants, check_cs, _ = _theorem_setup(config, f, engine)
    d_m1 = constants.d_m1 if constants is not None else None
    records = []
    exemplar: dict = {}
    for r in range(*replicate_range):
        record, ex = _replicate_record(config, engine, f, noise_spec, shape, check_cs, d_m1, r)
        records.append(record)
        if ex:
            exemplar = ex
    return records, exemplar


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run all replicates (optionally across processes) and assemble the report.

    Identical configs and seeds yield identical reports, for any ``jobs``.
    """
    logger.info("running scenario %r: n=%d, %d replicates", config.scenario, config.n, config.replicates)
    engine = _RegressogramEngine(config.n, config.piece_counts)
    f = build_signal(config)
    constants, check_cs, reason = _theorem_setup(config, f, engine)

    theorem_info: dict | None = None
    if constants is not None:
        vacuous = (
            max(constants.eta_minus, constants.eta_plus) >= 1.0
            or constants.prob_bound >= 1.0
            or check_cs is None
        )
        theorem_info = {
            "c_low": check_cs[0] if check_cs else None,
            "c_high": check_cs[1] if check_cs else None,
            "vacuous": bool(vacuous),
            "note": reason,
        }
        if vacuous:
            logger.warning(
                "theorem band is vacuous (eta-=%.3g, eta+=%.3g, prob_bound=%.3g)",
                constants.eta_minus, constants.eta_plus, constants.prob_bound,
            )
    elif reason is not None:
        theorem_info = {"c_low": None, "c_high": None, "vacuous": True, "note": reason}

    if jobs <= 1 or config.replicates == 1:
        records, exemplar = _run_chunk(config.to_dict(), (0, config.replicates))
    else:
        jobs = min(jobs, config.replicates)
        bounds = np.linspace(0, config.replicates, jobs + 1).astype(int)
        chunks = [(int(lo), int(hi)) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        records = []
        exemplar = {}
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_chunk, config.to_dict(), ch) for ch in chunks]
            for fut in futures:
                recs, ex = fut.result()
                records.extend(recs)
                if ex:
                    exemplar = ex
        records.sort(key=lambda r: r["replicate"])

    return ExperimentReport(
        config=config.to_dict(),
        constants=constants.to_dict() if constants is not None else None,
        theorem=theorem_info,
        records=tuple(records),
        aggregates=compute_aggregates(records),
        exemplar=exemplar,
        meta={
            "package_version": __version__,
            "numpy_version": np.__version__,
            "seed": config.seed,
        },
    )


def verify_theorem(report: ExperimentReport, constants: TheoremConstants | None = None) -> dict:
    """Compare the empirical joint-event frequency with the theorem bound.

    PASS iff frequency >= (1 - prob_bound) - 3 * binomial stderr.  A band
    with eta >= 1, a negative check constant, or a probability bound >= 1
    yields the verdict "vacuous bound" (not FAIL).
    """
    if constants is None:
        if report.constants is None:
            raise ValueError(
                "report carries no theorem constants: " + str((report.theorem or {}).get("note"))
            )
        constants = TheoremConstants.from_dict(report.constants)
    info = report.theorem or {}
    verdict = {
        "eta_minus": constants.eta_minus,
        "eta_plus": constants.eta_plus,
        "prob_bound": constants.prob_bound,
        "c_low": info.get("c_low"),
        "c_high": info.get("c_high"),
    }
    if info.get("vacuous", True):
        verdict.update({"verdict": "vacuous bound", "frequency": None, "bound": None, "stderr": None})
        return verdict
    events = [r["theorem_event"] for r in report.records if r["theorem_event"] is not None]
    freq = sum(events) / len(events)
    stderr = math.sqrt(freq * (1.0 - freq) / len(events))
    bound = 1.0 - constants.prob_bound
    verdict.update(
        {
            "verdict": "PASS" if freq >= bound - 3.0 * stderr else "FAIL",
            "frequency": freq,
            "bound": bound,
            "stderr": stderr,
            "replicates": len(events),
        }
    )
    return verdict


def emit_report(report: ExperimentReport, out_dir, formats: Sequence[str] = ("json",)) -> list[Path]:
    """Write the report in the requested formats; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for fmt in formats:
        if fmt == "json":
            p = out / "report.json"
            p.write_text(report.to_json())
            written.append(p)
        elif fmt == "csv":
            written.extend(_emit_csv(report, out))
        elif fmt == "svg":
            from . import plots

            written.extend(plots.emit_svg(report, out))
        else:
            raise ValueError(f"unknown format {fmt!r}")
    for p in written:
        logger.info("wrote %s", p)
    return written


def _emit_csv(report: ExperimentReport, out: Path) -> list[Path]:
    records_path = out / "records.csv"
    methods = sorted({name for r in report.records for name in r["c_hat"]})
    with open(records_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["replicate", "oracle", "oracle_risk", "theorem_event",
                  "dim_at_c_low", "dim_at_c_high"]
        for name in methods:
            header += [f"c_hat_{name}", f"selected_{name}", f"selected_risk_{name}"]
        writer.writerow(header)
        for r in report.records:
            row = [r["replicate"], r["oracle"], r["oracle_risk"], r["theorem_event"],
                   r["dim_at_c_low"], r["dim_at_c_high"]]
            for name in methods:
                row += [r["c_hat"].get(name), r["selected"].get(name),
                        r["selected_risk"].get(name)]
            writer.writerow(row)
    paths = [records_path]
    if report.exemplar:
        seg_path = out / "path_segments.csv"
        with open(seg_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["C_low", "C_high", "model_id", "dim", "emp_risk"])
            for seg in report.exemplar["segments"]:
                writer.writerow([seg["c_low"], seg["c_high"], seg["model_id"],
                                 seg["dim"], seg["emp_risk"]])
        paths.append(seg_path)
    return paths

"""Data-driven estimation of the minimal-penalty constant C_hat.

Four calibrators are provided: the dimension jump (largest drop of the
complexity path), a merged-jump variant that pools very close breakpoints,
a window calibrator (midpoint between the last high-complexity and first
low-complexity penalty constants), and the slope of the empirical risk
against the penalty weight over the large models.  The final selection then
minimizes ``emp_risk + factor * C_hat * w`` with factor 2 by default.

Calibrators never raise on data that merely defeats them; they return a
result with ``c_hat = None`` and an explanatory warning.  Invalid arguments
do raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .path import PenaltyShape, SelectionPath, brute_force_select, complexity_path


class CalibrationError(RuntimeError):
    """Raised when a failed calibration is used for final selection."""


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of one calibrator: C_hat (or None on failure) plus diagnostics."""

    method: str
    c_hat: float | None
    diagnostics: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.c_hat is not None and not self.c_hat > 0:
            raise ValueError("c_hat must be > 0 when present")
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def ok(self) -> bool:
        return self.c_hat is not None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "c_hat": self.c_hat,
            "diagnostics": self.diagnostics,
            "warnings": list(self.warnings),
        }


def _jump_table(path: SelectionPath, complexities: Mapping[str, float]) -> list[dict]:
    step = complexity_path(path, complexities)
    return [
        {"c": float(c), "drop": float(step.values[j] - step.values[j + 1])}
        for j, c in enumerate(path.breakpoints)
    ]


def _plateau_table(path: SelectionPath, complexities: Mapping[str, float]) -> list[dict]:
    step = complexity_path(path, complexities)
    bounds = [0.0, *path.breakpoints.tolist(), float("inf")]
    return [
        {"c_low": bounds[j], "c_high": bounds[j + 1], "complexity": float(step.values[j])}
        for j in range(len(step.values))
    ]


def c_hat_jump(path: SelectionPath, complexities: Mapping[str, float]) -> CalibrationResult:
    """C_hat = the breakpoint with the largest complexity drop (ties: smallest C)."""
    jumps = _jump_table(path, complexities)
    diagnostics = {"jumps": jumps, "plateaus": _plateau_table(path, complexities)}
    if not jumps:
        return CalibrationResult("jump", None, diagnostics, ("no jump",))
    best = max(jumps, key=lambda j: (j["drop"], -j["c"]))
    return CalibrationResult("jump", best["c"], diagnostics)


def c_hat_jump_merged(
    path: SelectionPath, complexities: Mapping[str, float], delta_rel: float
) -> CalibrationResult:
    """Jump calibrator after pooling breakpoints with small relative gaps.

    Consecutive breakpoints with relative gap ``(C_next - C) / C_next`` at
    most ``delta_rel`` form one composite jump located at the drop-weighted
    mean of its members, with the summed drop.  ``delta_rel = 0`` reduces
    exactly to :func:`c_hat_jump`.
    """
    if not 0.0 <= delta_rel < 1.0:
        raise ValueError("delta_rel must lie in [0, 1)")
    jumps = _jump_table(path, complexities)
    diagnostics = {"jumps": jumps, "plateaus": _plateau_table(path, complexities)}
    if not jumps:
        return CalibrationResult("jump_merged", None, diagnostics, ("no jump",))

    clusters: list[list[dict]] = [[jumps[0]]]
    for prev, cur in zip(jumps, jumps[1:]):
        if (cur["c"] - prev["c"]) / cur["c"] <= delta_rel:
            clusters[-1].append(cur)
        else:
            clusters.append([cur])

    merged = []
    for cluster in clusters:
        total = sum(j["drop"] for j in cluster)
        if total > 0:
            loc = sum(j["drop"] * j["c"] for j in cluster) / total
        else:
            loc = float(np.mean([j["c"] for j in cluster]))
        merged.append({"c": float(loc), "drop": float(total), "members": len(cluster)})
    diagnostics["merged_jumps"] = merged
    best = max(merged, key=lambda j: (j["drop"], -j["c"]))
    return CalibrationResult("jump_merged", best["c"], diagnostics)


def c_hat_window(
    path: SelectionPath,
    complexities: Mapping[str, float],
    frac_high: float = 0.9,
    frac_low: float = 0.1,
) -> CalibrationResult:
    """Midpoint of the window where complexity falls from high to low.

    With D* the maximal complexity on the path, ``C_high`` is the largest C
    at which the complexity is still >= frac_high * D* and ``C_low`` the
    smallest C at which it is <= frac_low * D*; C_hat is their midpoint.
    Fails (with a warning) when a threshold is never attained or when the
    complexity is non-monotone enough that C_low < C_high.
    """
    if not 0.0 < frac_low < frac_high < 1.0:
        raise ValueError("need 0 < frac_low < frac_high < 1")
    step = complexity_path(path, complexities)
    d_star = step.max()
    t_high = frac_high * d_star
    t_low = frac_low * d_star
    diagnostics = {
        "plateaus": _plateau_table(path, complexities),
        "d_star": d_star,
        "t_high": t_high,
        "t_low": t_low,
    }
    high_idx = [j for j, v in enumerate(step.values) if v >= t_high]
    low_idx = [j for j, v in enumerate(step.values) if v <= t_low]
    if not high_idx or not low_idx or max(high_idx) == len(step.values) - 1:
        return CalibrationResult(
            "window", None, diagnostics, ("thresholds never attained",)
        )
    c_high = float(path.breakpoints[max(high_idx)])
    c_low = 0.0 if min(low_idx) == 0 else float(path.breakpoints[min(low_idx) - 1])
    diagnostics.update({"c_high": c_high, "c_low": c_low, "midpoint": (c_high + c_low) / 2})
    if c_low < c_high:
        return CalibrationResult(
            "window", None, diagnostics,
            ("non-monotone reported complexity: C_low < C_high",),
        )
    return CalibrationResult("window", (c_high + c_low) / 2, diagnostics)


def _repeated_median_fit(w: np.ndarray, a: np.ndarray) -> tuple[float, float]:
    slopes = []
    for i in range(w.size):
        dw = w - w[i]
        keep = dw != 0
        if not np.any(keep):
            continue
        slopes.append(np.median((a[keep] - a[i]) / dw[keep]))
    slope = float(np.median(slopes))
    intercept = float(np.median(a - slope * w))
    return slope, intercept


def c_hat_slope(
    emp_risks: Mapping[str, float],
    shape: PenaltyShape,
    region_frac: float = 0.4,
    robust: bool = False,
) -> CalibrationResult:
    """Minus the slope of empirical risk against penalty weight, large models.

    The fit region keeps models with ``w >= (1 - region_frac) * max(w)``.
    A non-negative fitted slope is a failure (no minimal-penalty behaviour),
    not an exception.  ``robust=True`` switches the plain least-squares fit
    to a repeated-median fit.
    """
    if not 0.0 < region_frac <= 1.0:
        raise ValueError("region_frac must lie in (0, 1]")
    if set(emp_risks) != set(shape.weights):
        raise ValueError("emp_risks and shape must share the same model ids")
    w_max = max(shape.weights.values())
    region = sorted(m for m in emp_risks if shape.weights[m] >= (1 - region_frac) * w_max)
    if len(region) < 2:
        raise ValueError(
            f"slope fit needs at least 2 models in the region, got {len(region)}"
        )
    w = np.array([shape.weights[m] for m in region])
    a = np.array([float(emp_risks[m]) for m in region])
    if np.all(w == w[0]):
        raise ValueError("slope fit region has constant weights")
    if robust:
        slope, intercept = _repeated_median_fit(w, a)
    else:
        slope, intercept = np.polyfit(w, a, 1)
    resid = a - (slope * w + intercept)
    diagnostics = {
        "region": region,
        "slope": float(slope),
        "intercept": float(intercept),
        "residual_rms": float(np.sqrt(np.mean(resid**2))),
        "robust": robust,
    }
    if slope >= 0:
        return CalibrationResult(
            "slope", None, diagnostics,
            ("non-negative slope: no minimal-penalty behavior detected",),
        )
    return CalibrationResult("slope", float(-slope), diagnostics)


def select_final(
    emp_risks: Mapping[str, float],
    shape: PenaltyShape,
    result: CalibrationResult,
    factor: float = 2.0,
) -> str:
    """Final model: argmin of ``emp_risk + factor * C_hat * w`` (path tie rule)."""
    if not factor > 0:
        raise ValueError("factor must be > 0")
    if not result.ok:
        raise CalibrationError(f"calibration failed ({result.method}): {result.warnings}")
    return brute_force_select(emp_risks, shape, factor * result.c_hat)

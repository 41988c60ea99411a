"""Exact regularization path of the penalized criterion over the constant C.

For each model the penalized criterion is an affine function of C,
``a_m + C * w_m`` with intercept the empirical risk and slope the penalty
shape weight.  The selected-model map ``C -> m_hat(C)`` is therefore the
lower envelope of a line family; it is computed exactly with a
sort-and-scan (convex-hull-trick) pass in O(M log M).

Tie rule, applied consistently everywhere: among models achieving the same
criterion value, prefer smaller weight, then smaller intercept, then
smaller id.  At a breakpoint this makes the path right-continuous (the
smaller-weight model owns the breakpoint).
"""

from __future__ import annotations

import csv
import io
from bisect import bisect_right
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ._validate import as_square_matrix

COLLINEAR_RTOL = 1e-12
BREAKPOINT_RTOL = 1e-9


@dataclass(frozen=True)
class PenaltyShape:
    """Per-model penalty weights w_m >= 0 (penalty = C * w_m)."""

    weights: dict

    def __post_init__(self):
        w = {str(k): float(v) for k, v in self.weights.items()}
        if not w:
            raise ValueError("penalty shape must contain at least one weight")
        for k, v in w.items():
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"weight for {k!r} must be finite and >= 0, got {v}")
        object.__setattr__(self, "weights", w)

    def __getitem__(self, model_id: str) -> float:
        return self.weights[model_id]

    @classmethod
    def from_dims(cls, dims: Mapping[str, int], n: int) -> "PenaltyShape":
        """Dimension shape w_m = D_m / n (the iid special case)."""
        return cls({i: d / n for i, d in dims.items()})

    @classmethod
    def dimension(cls, collection) -> "PenaltyShape":
        return cls.from_dims(collection.dims(), collection.n)

    @classmethod
    def covariance(cls, collection, sigma) -> "PenaltyShape":
        """Covariance shape w_m = tr(Sigma @ Pi_m) / n for dependent noise."""
        sigma = as_square_matrix(sigma, collection.n, "Sigma")
        weights = {}
        for m in collection:
            weights[m.id] = float(np.sum(m.basis * (sigma @ m.basis))) / collection.n
        return cls(weights)


@dataclass(frozen=True)
class PathSegment:
    model_id: str
    intercept: float  # empirical risk a_m
    weight: float  # penalty weight w_m


@dataclass(frozen=True, eq=False)
class SelectionPath:
    """Piecewise-constant selection map as breakpoints plus segments.

    Segment j is selected on the open interval (C_{j-1}, C_j) with C_0 = 0
    and C_{K+1} = +inf; at a breakpoint the right segment is selected.
    """

    breakpoints: np.ndarray
    segments: tuple[PathSegment, ...]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        segs = tuple(self.segments)
        if len(segs) != bp.size + 1:
            raise ValueError("need exactly one more segment than breakpoints")
        if bp.size and (np.any(bp <= 0) or np.any(np.diff(bp) <= 0)):
            raise ValueError("breakpoints must be strictly increasing and positive")
        for s0, s1, c in zip(segs, segs[1:], bp):
            if not (s1.weight < s0.weight and s1.intercept > s0.intercept):
                raise ValueError(
                    "segment weights must strictly decrease and intercepts "
                    "strictly increase along the path"
                )
            v0 = s0.intercept + c * s0.weight
            v1 = s1.intercept + c * s1.weight
            scale = max(abs(s0.intercept), abs(s1.intercept),
                        abs(c * s0.weight), abs(c * s1.weight), 1e-300)
            if abs(v0 - v1) > BREAKPOINT_RTOL * scale:
                raise ValueError("adjacent criteria do not meet at the breakpoint")
        bp = bp.copy()
        bp.flags.writeable = False
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "segments", segs)

    @property
    def model_ids(self) -> list[str]:
        return [s.model_id for s in self.segments]

    def segment_at(self, c: float) -> PathSegment:
        if c < 0:
            raise ValueError("C must be >= 0")
        return self.segments[bisect_right(self.breakpoints, c)]


def _tie_key(intercept: float, weight: float, model_id: str):
    return (weight, intercept, model_id)


def compute_path(emp_risks: Mapping[str, float], shape: PenaltyShape) -> SelectionPath:
    """Exact lower envelope of the lines C -> emp_risk_m + C * w_m on C >= 0.

    Models that are never minimal for any C >= 0 are absent from the result.
    Collinear lines (equal within 1e-12 relative) are deduplicated by the
    tie rule before the scan.
    """
    if not emp_risks:
        raise ValueError("emp_risks must be non-empty")
    if set(emp_risks) != set(shape.weights):
        raise ValueError("emp_risks and shape must share the same model ids")
    lines = []
    for mid, a in emp_risks.items():
        a = float(a)
        if not np.isfinite(a):
            raise ValueError(f"empirical risk for {mid!r} must be finite")
        lines.append((float(shape.weights[mid]), a, str(mid)))

    # Sort by weight descending, then tie rule; collapse runs of equal weight
    # (only the best line of each run can ever be selected).
    lines.sort(key=lambda t: (-t[0], t[1], t[2]))
    pruned = []
    for w, a, mid in lines:
        if pruned:
            w0, a0, _ = pruned[-1]
            same_w = abs(w - w0) <= COLLINEAR_RTOL * max(abs(w), abs(w0))
            if same_w:
                continue  # previous line has smaller (a, id): dominates
        pruned.append((w, a, mid))

    hull: list[tuple[tuple[float, float, str], float]] = []
    for w, a, mid in pruned:
        cstar = 0.0
        while hull:
            (w0, a0, _), c0 = hull[-1]
            if a <= a0:  # never worse than the top line anywhere on [c0, inf)
                hull.pop()
                continue
            cstar = (a - a0) / (w0 - w)
            if cstar <= c0:  # top's interval would be empty
                hull.pop()
                continue
            break
        hull.append(((w, a, mid), cstar if hull else 0.0))

    breakpoints = np.array([c for _, c in hull[1:]])
    segments = tuple(PathSegment(mid, a, w) for (w, a, mid), _ in hull)
    return SelectionPath(breakpoints, segments)


def select_at(path: SelectionPath, c: float) -> str:
    """Selected model at penalty constant C (right-continuous at breakpoints)."""
    return path.segment_at(c).model_id


def brute_force_select(emp_risks: Mapping[str, float], shape: PenaltyShape, c: float) -> str:
    """Linear-scan argmin with the path's tie rule; the test oracle."""
    if not emp_risks:
        raise ValueError("emp_risks must be non-empty")
    if set(emp_risks) != set(shape.weights):
        raise ValueError("emp_risks and shape must share the same model ids")
    if c < 0:
        raise ValueError("C must be >= 0")
    best = None
    for mid, a in emp_risks.items():
        w = shape.weights[mid]
        key = (a + c * w, *_tie_key(a, w, str(mid)))
        if best is None or key < best[0]:
            best = (key, str(mid))
    return best[1]


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function given by breakpoints and K+1 values."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if vals.size != bp.size + 1:
            raise ValueError("need exactly one more value than breakpoints")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __call__(self, c):
        idx = np.searchsorted(self.breakpoints, c, side="right")
        return self.values[idx]

    def max(self) -> float:
        return float(np.max(self.values))


def complexity_path(path: SelectionPath, reported: Mapping[str, float]) -> StepFunction:
    """The step function C -> reported value of the selected model.

    With the reported value proportional to the penalty weight (e.g. the
    dimension under the dimension shape) the result is non-increasing by the
    envelope structure.
    """
    try:
        values = np.array([float(reported[s.model_id]) for s in path.segments])
    except KeyError as exc:
        raise ValueError(f"no reported value for model {exc.args[0]!r}") from None
    return StepFunction(path.breakpoints, values)


def path_to_csv(path: SelectionPath, dims: Mapping[str, int], fh=None) -> str:
    """Serialize as rows (C_low, C_high, model_id, dim, emp_risk)."""
    buf = fh if fh is not None else io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["C_low", "C_high", "model_id", "dim", "emp_risk"])
    bounds = [0.0, *path.breakpoints.tolist(), "inf"]
    for seg, lo, hi in zip(path.segments, bounds, bounds[1:]):
        writer.writerow([lo, hi, seg.model_id, dims[seg.model_id], seg.intercept])
    return buf.getvalue() if fh is None else ""

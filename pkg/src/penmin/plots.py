"""SVG plot emission for experiment reports (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finite_bounds(segments):
    cs = [s["c_low"] for s in segments]
    last = segments[-1]
    hi = last["c_low"] * 1.5 if last["c_low"] else 1.0
    return cs + [max(hi, cs[-1] + 1.0)]


def plot_complexity_path(exemplar: dict, out_path: Path) -> Path:
    segments = exemplar["segments"]
    bounds = _finite_bounds(segments)
    fig, ax = plt.subplots(figsize=(6, 4))
    for seg, lo, hi in zip(segments, bounds, bounds[1:]):
        ax.hlines(seg["dim"], lo, hi, colors="C0")
    ax.set_xlabel("penalty constant C")
    ax.set_ylabel("selected dimension")
    ax.set_title("complexity path (replicate 0)")
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def plot_risk_vs_weight(exemplar: dict, out_path: Path) -> Path:
    weights = exemplar["weights"]
    risks = exemplar["emp_risks"]
    w = np.array([weights[m] for m in sorted(weights)])
    a = np.array([risks[m] for m in sorted(weights)])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(w, a, s=12, label="models")
    if w.size >= 2:
        order = np.argsort(w)[-max(2, w.size // 2):]
        slope, intercept = np.polyfit(w[order], a[order], 1)
        grid = np.linspace(w.min(), w.max(), 50)
        ax.plot(grid, intercept + slope * grid, "C1--",
                label=f"slope fit ({-slope:.3g})")
    ax.set_xlabel("penalty weight w")
    ax.set_ylabel("empirical risk")
    ax.legend()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def plot_c_hat_hist(records, out_path: Path) -> Path:
    methods = sorted({name for r in records for name in r["c_hat"]})
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in methods:
        vals = [r["c_hat"][name] for r in records if r["c_hat"][name] is not None]
        if vals:
            ax.hist(vals, bins=30, alpha=0.5, label=name)
    ax.set_xlabel("C_hat")
    ax.set_ylabel("replicates")
    ax.legend()
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def emit_svg(report, out_dir: Path) -> list[Path]:
    out = Path(out_dir)
    written = []
    if report.exemplar:
        written.append(plot_complexity_path(report.exemplar, out / "complexity_path.svg"))
        written.append(plot_risk_vs_weight(report.exemplar, out / "risk_vs_weight.svg"))
    written.append(plot_c_hat_hist(report.records, out / "c_hat_hist.svg"))
    return written

"""Static three-panel SVG of simulated means against the replica curves."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from . import replica
from .errors import ReplicaPortfolioError
from .harness import ExperimentSummary

PANELS = (("epsilon", r"$\varepsilon$"), ("q_w", r"$q_w$"), ("sharpe", r"$S$"))


def _curve(summary: ExperimentSummary, key: str, grid: np.ndarray) -> np.ndarray:
    out = np.full(grid.size, np.nan)
    for i, R in enumerate(grid):
        try:
            out[i] = getattr(replica.predict(summary.moments, summary.config.alpha, float(R)), key)
        except ReplicaPortfolioError:
            pass
    return out


def _references(summary: ExperimentSummary, key: str) -> list[tuple[str, float, str]]:
    """(orientation, value, label) reference lines per panel."""
    m, alpha = summary.moments, summary.config.alpha
    refs = [("v", m.R1, "$R_1$")]
    if key == "epsilon":
        refs.append(("h", replica.epsilon_budget_only(m, alpha), r"$\varepsilon_0$"))
    elif key == "sharpe":
        try:
            trip = replica.sharpe_triple(m, alpha)
            refs.append(("v", trip.r_star, "$R^*$"))
            refs.append(("h", trip.s_at_rstar, "$S(R^*)$"))
        except ReplicaPortfolioError:
            pass
        refs.append(("h", replica.sharpe_at_infinity(m, alpha), r"$S(\infty)$"))
    return refs


def write_svg(summary: ExperimentSummary, path: str | Path) -> None:
    """Means with standard-error bars, prediction lines and dashed references.

    The output is byte-stable for equal inputs (no date stamp, fixed id salt).
    """
    rows = [r for r in summary.rows if r.valid]
    r_vals = np.array([r.R for r in rows])
    grid = np.array(summary.config.r_grid)
    dense = np.linspace(grid.min(), grid.max(), 201) if grid.size > 1 else grid

    with matplotlib.rc_context({"svg.hashsalt": "replica-portfolio", "svg.fonttype": "path"}):
        fig = Figure(figsize=(12, 3.8))
        FigureCanvasSVG(fig)
        axes = fig.subplots(1, 3)
        for ax, (key, label) in zip(axes, PANELS):
            means = np.array([getattr(r, key).mean for r in rows])
            ses = np.array([getattr(r, key).se if getattr(r, key).se is not None else 0.0 for r in rows])
            ax.errorbar(r_vals, means, yerr=ses, fmt="o", ms=3, capsize=2, color="C0", label="simulation (mean ± SE)")
            ax.plot(dense, _curve(summary, key, dense), "-", color="C3", lw=1.2, label="prediction")
            for orient, value, ref_label in _references(summary, key):
                if not math.isfinite(value):
                    continue
                if orient == "v":
                    if dense.min() <= value <= dense.max():
                        ax.axvline(value, ls="--", color="0.5", lw=0.8)
                        ha = "right" if ref_label == "$R_1$" else "left"
                        ax.annotate(
                            ref_label, (value, 1.0), xycoords=("data", "axes fraction"), fontsize=8, va="bottom", ha=ha
                        )
                else:
                    ax.axhline(value, ls="--", color="0.5", lw=0.8)
                    ax.annotate(ref_label, (1.0, value), xycoords=("axes fraction", "data"), fontsize=8, ha="left")
            ax.set_xlabel("$R$")
            ax.set_ylabel(label)
        axes[0].legend(fontsize=8, loc="upper center")
        cfg = summary.config
        fig.suptitle(f"N={cfg.n_assets}, p={cfg.n_periods}, M={cfg.n_trials}, seed={cfg.seed}", fontsize=10)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})

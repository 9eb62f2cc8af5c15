"""Figure rendering for experiment records.

The CSV is the machine-readable contract; these plots are a convenience view
of the same aggregates, written as PNG files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import MetricsSummary, summarize
from .policy import prob_unidentified


def render_figures(
    results,
    outdir,
    *,
    summary: MetricsSummary | None = None,
    f: int | None = None,
    p: float | None = None,
) -> list[Path]:
    """Write loss, distance, efficiency and identification plots to ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if summary is None:
        summary = summarize(results, f=f, p=p)
    written: list[Path] = []
    iters = np.arange(summary.iterations)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iters, summary.loss_by_iteration, lw=1.2, color="#1f78b4")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean batch loss")
    ax.set_yscale("log")
    ax.set_title(f"{summary.scheme}: loss")
    written.append(_save(fig, outdir / "loss.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iters, summary.efficiency_by_iteration, lw=1.0, color="#33a02c",
            label="mean per-iteration efficiency")
    ax.axhline(summary.overall_efficiency, color="#666666", ls="--",
               label=f"overall {summary.overall_efficiency:.3f}")
    if summary.efficiency_bound is not None:
        ax.axhline(summary.efficiency_bound, color="#d7301f", ls=":",
                   label=f"lower bound {summary.efficiency_bound:.3f}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("gradients used / computed")
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title(f"{summary.scheme}: computation efficiency")
    written.append(_save(fig, outdir / "efficiency.png"))

    if summary.identification_iterations:
        fig, ax = plt.subplots(figsize=(7, 4))
        ident = np.array(summary.identification_iterations)
        horizon = int(ident.max()) + 1
        ts = np.arange(1, horizon + 1)
        survival = [(ident >= t).mean() for t in ts]
        ax.step(ts, survival, where="post", color="#1f78b4", label="empirical unidentified fraction")
        if f is not None and p is not None and summary.mean_q > 0:
            bound = [prob_unidentified(summary.mean_q, p, int(t)) for t in ts]
            ax.plot(ts, bound, color="#d7301f", ls=":", label="(1 - q p)^t")
        ax.set_xlabel("iteration t")
        ax.set_ylabel("fraction unidentified after t")
        ax.legend(fontsize=8)
        ax.set_title(f"{summary.scheme}: identification time")
        written.append(_save(fig, outdir / "identification.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    dist = _dist_by_iteration(results, summary.iterations)
    ax.plot(iters, dist, lw=1.2, color="#6a3d9a")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean distance to optimum")
    ax.set_yscale("log")
    ax.set_title(f"{summary.scheme}: convergence")
    written.append(_save(fig, outdir / "distance.png"))
    return written


def _dist_by_iteration(results, iterations: int) -> list[float]:
    per_trial = []
    for entry in results:
        records = entry.records if hasattr(entry, "records") else entry
        per_trial.append(records)
    out = []
    for t in range(iterations):
        at_t = [records[t].dist_to_opt for records in per_trial if t < len(records)]
        out.append(sum(at_t) / len(at_t))
    return out


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

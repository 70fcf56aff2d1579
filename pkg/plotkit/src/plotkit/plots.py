"""Band and histogram rendering from epichain CSV outputs.

Both entry points read only the documented CSV schemas, never recompute
statistics from raw trajectories, and emit the plotted numbers as a sidecar
CSV next to the image so correctness is testable without image comparison.
"""

import csv
import os
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "PlotJob",
    "BandsResult",
    "PosteriorsResult",
    "plot_dispersion_bands",
    "plot_posteriors",
]

# Chain CSV columns that are bookkeeping rather than sampled parameters.
_CHAIN_META = ("iteration", "score", "accepted")


@dataclass
class PlotJob:
    """Inputs and knobs for one rendering run.

    ``summaries`` maps dispersion level to a summary CSV path (band plots);
    ``chain`` points at a chain CSV (posterior plots).  ``alpha_range`` is
    the fill-opacity ramp from the lowest to the highest dispersion band.
    """

    output: str
    summaries: dict = field(default_factory=dict)  # {nu: summary.csv path}
    deterministic: Optional[str] = None  # measurements.csv overlay
    chain: Optional[str] = None
    compartments: Optional[list] = None  # None selects every compartment
    alpha_range: tuple = (0.25, 0.75)
    burn_in: int = 0
    bins: int = 40
    true_values: dict = field(default_factory=dict)
    sidecar: Optional[str] = None

    def sidecar_path(self):
        if self.sidecar:
            return self.sidecar
        root, _ = os.path.splitext(self.output)
        return root + ".csv"


@dataclass
class BandsResult:
    image: str
    sidecar: str
    compartments: list
    n_layers: int


@dataclass
class PosteriorsResult:
    image: str
    sidecar: str
    parameters: list


def _read_table(path):
    """CSV as (header list, float column dict)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    if not rows:
        raise ValueError(f"{path} has no data rows")
    data = np.asarray(rows)
    return header, {name: data[:, j] for j, name in enumerate(header)}


def _summary_compartments(header):
    return [h[: -len("_mean")] for h in header if h.endswith("_mean")]


def plot_dispersion_bands(job):
    """Layered percentile bands, one axes per compartment.

    Bands for increasing dispersion fade in with darker gray; the lowest
    level is drawn with dotted edges.  A deterministic series, when given,
    is overlaid on the infected axes.  Returns a BandsResult.
    """
    if not job.summaries:
        raise ValueError("at least one summary CSV is required")
    levels = sorted(job.summaries)
    tables = {}
    times = None
    comps = None
    for nu in levels:
        header, cols = _read_table(job.summaries[nu])
        if times is None:
            times = cols["t"]
            comps = _summary_compartments(header)
        elif not np.array_equal(cols["t"], times):
            raise ValueError(
                f"summary for nu={nu} has a different time axis than nu={levels[0]}"
            )
        elif _summary_compartments(header) != comps:
            raise ValueError(f"summary for nu={nu} has different compartments")
        tables[nu] = cols
    if job.compartments:
        missing = [c for c in job.compartments if c not in comps]
        if missing:
            raise ValueError(f"compartments {missing} not in summary columns {comps}")
        comps = list(job.compartments)

    alphas = np.linspace(job.alpha_range[0], job.alpha_range[1], len(levels))
    grays = np.linspace(0.6, 0.2, len(levels))
    fig, axes = plt.subplots(
        len(comps), 1, figsize=(8, 2.6 * len(comps)), sharex=True, squeeze=False
    )
    for ax, comp in zip(axes[:, 0], comps):
        for j, nu in enumerate(levels):
            cols = tables[nu]
            low, high = cols[f"{comp}_p05"], cols[f"{comp}_p95"]
            color = str(grays[j])
            if j == 0:
                ax.plot(times, low, color="black", linestyle=":", linewidth=1.0,
                        label=f"nu={nu:g}")
                ax.plot(times, high, color="black", linestyle=":", linewidth=1.0)
            else:
                ax.fill_between(times, low, high, color=color, alpha=alphas[j],
                                linewidth=0, label=f"nu={nu:g}")
        ax.plot(times, tables[levels[0]][f"{comp}_mean"], color="black",
                linewidth=0.8)
        ax.set_ylabel(comp)
    if job.deterministic and "I" in comps:
        _, det = _read_table(job.deterministic)
        axes[comps.index("I"), 0].plot(
            det["t"], det["y"], color="tab:red", linewidth=1.2, label="deterministic"
        )
    axes[0, 0].legend(loc="best", fontsize="small")
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(job.output, dpi=120)
    plt.close(fig)

    sidecar = job.sidecar_path()
    with open(sidecar, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["nu", "compartment", "t", "mean", "p_low", "p_high"])
        for nu in levels:
            cols = tables[nu]
            for comp in comps:
                for k in range(times.size):
                    writer.writerow([
                        f"{nu:.17g}", comp, f"{times[k]:.17g}",
                        f"{cols[f'{comp}_mean'][k]:.17g}",
                        f"{cols[f'{comp}_p05'][k]:.17g}",
                        f"{cols[f'{comp}_p95'][k]:.17g}",
                    ])
    return BandsResult(
        image=job.output, sidecar=sidecar, compartments=comps, n_layers=len(levels)
    )


def plot_posteriors(job):
    """One histogram per sampled parameter with optional true-value markers.

    Samples before ``job.burn_in`` are discarded; an empty remainder is an
    error.  Returns a PosteriorsResult.
    """
    if not job.chain:
        raise ValueError("a chain CSV is required")
    header, cols = _read_table(job.chain)
    params = [h for h in header if h not in _CHAIN_META]
    if not params:
        raise ValueError(f"{job.chain} has no parameter columns")
    n_total = cols[params[0]].size
    if job.burn_in >= n_total:
        raise ValueError(
            f"burn-in {job.burn_in} leaves no samples (chain length {n_total})"
        )

    fig, axes = plt.subplots(
        1, len(params), figsize=(3.6 * len(params), 3.0), squeeze=False
    )
    hists = {}
    for ax, name in zip(axes[0], params):
        kept = cols[name][job.burn_in:]
        counts, edges = np.histogram(kept, bins=job.bins)
        hists[name] = (counts, edges)
        ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge",
               color="0.5", edgecolor="0.3")
        if name in job.true_values:
            ax.axvline(job.true_values[name], color="tab:red", linewidth=1.2)
        ax.set_xlabel(name)
    axes[0, 0].set_ylabel("count")
    fig.tight_layout()
    fig.savefig(job.output, dpi=120)
    plt.close(fig)

    sidecar = job.sidecar_path()
    with open(sidecar, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "bin_left", "bin_right", "count"])
        for name in params:
            counts, edges = hists[name]
            for j in range(counts.size):
                writer.writerow([
                    name, f"{edges[j]:.17g}", f"{edges[j + 1]:.17g}", counts[j]
                ])
    return PosteriorsResult(image=job.output, sidecar=sidecar, parameters=params)

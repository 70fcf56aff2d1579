"""Render percentile fade bands and posterior histograms from CSV files."""

__version__ = "0.1.0"

from .plots import (  # noqa: F401
    BandsResult,
    PlotJob,
    PosteriorsResult,
    plot_dispersion_bands,
    plot_posteriors,
)

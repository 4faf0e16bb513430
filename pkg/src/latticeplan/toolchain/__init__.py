"""Command-line pipeline, metrics, and plot emission."""

from .metrics import MetricsReport, metrics_csv, metrics_for
from .svg import scene_svg

__all__ = ["MetricsReport", "metrics_csv", "metrics_for", "scene_svg"]

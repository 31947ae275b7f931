"""Deterministic orchestration helpers: job fan-out, run aggregation, plots."""

from .aggregator import collect_runs, correlations, results_table
from .jobs import WorkItem, run_jobs

__all__ = ["WorkItem", "collect_runs", "correlations", "results_table", "run_jobs"]

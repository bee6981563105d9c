# Copyright 2026 The aqop Authors
# SPDX-License-Identifier: Apache-2.0
"""Daily PM10 and oxidative-potential estimation from satellite image patches."""

from ._aqop import (  # noqa: F401
    AqopError,
    MetForest,
    aggregate_met,
    apply_outlier_filter,
    assign_splits,
    bootstrap_ci,
    compute_metrics,
    emit_report,
    prepare_corpus,
    run_experiment,
    spearman,
    write_synthetic_corpus,
)

__all__ = [
    "AqopError",
    "MetForest",
    "aggregate_met",
    "apply_outlier_filter",
    "assign_splits",
    "bootstrap_ci",
    "compute_metrics",
    "emit_report",
    "prepare_corpus",
    "run_experiment",
    "spearman",
    "write_synthetic_corpus",
]

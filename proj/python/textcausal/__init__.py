"""Synthetic text causal-inference benchmark."""

from textcausal._core import (
    Dataset,
    EstimationError,
    apply_effect,
    config_keys,
    estimate,
    h,
    kendall_tau,
    make_dataset,
    naive_adjusted_ate,
    normalize_config,
    oracle_ate,
    pearson,
    run_grid,
    sample_ordering_pair,
    sample_structured_params,
)

__all__ = [
    "Dataset",
    "EstimationError",
    "apply_effect",
    "config_keys",
    "estimate",
    "h",
    "kendall_tau",
    "make_dataset",
    "naive_adjusted_ate",
    "normalize_config",
    "oracle_ate",
    "pearson",
    "run_grid",
    "sample_ordering_pair",
    "sample_structured_params",
]

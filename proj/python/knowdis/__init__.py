"""Python bindings for the knowdis pipeline."""

from ._knowdis import (
    ConfigError,
    DependencyError,
    KnowdisError,
    ParseError,
    anneal_count,
    causal_strength,
    cross_validate,
    expand,
    load_config,
    run_stage,
    span_strength,
    toy_ranking_recall,
    write_synthetic,
)

__all__ = [
    "ConfigError",
    "DependencyError",
    "KnowdisError",
    "ParseError",
    "anneal_count",
    "causal_strength",
    "cross_validate",
    "expand",
    "load_config",
    "run_stage",
    "span_strength",
    "toy_ranking_recall",
    "write_synthetic",
]

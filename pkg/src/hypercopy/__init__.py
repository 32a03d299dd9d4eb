"""Hyperedge copy model: simulation, asymptotics, fitting and link prediction."""

__version__ = "0.1.0"

from .core import HypergraphFormatError, TemporalHypergraph, load_tsv, write_tsv
from .gen import ModelParams, simulate_er, simulate_hcm, simulate_pa, truncated_poisson
from .asym import (
    AsymptoticSummary,
    intersection_profile,
    mean_degree,
    mean_edge_size,
    powerlaw_exponent,
    stationary_edge_size_dist,
)
from .metrics import intersection_density, rk_timeseries, tail_slope
from .sem import SemConfig, sem_fit
from .linkpred import EvalConfig, auc, candidate_score, evaluate, f1_at_median

__all__ = [
    "HypergraphFormatError", "TemporalHypergraph", "load_tsv", "write_tsv",
    "ModelParams", "simulate_hcm", "simulate_er", "simulate_pa", "truncated_poisson",
    "AsymptoticSummary", "intersection_profile", "mean_degree", "mean_edge_size",
    "powerlaw_exponent", "stationary_edge_size_dist",
    "intersection_density", "rk_timeseries", "tail_slope",
    "SemConfig", "sem_fit",
    "EvalConfig", "auc", "candidate_score", "evaluate", "f1_at_median",
]

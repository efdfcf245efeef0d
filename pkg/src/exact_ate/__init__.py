"""Exact randomization-based confidence sets for the average treatment effect.

Binary outcomes under balanced Bernoulli, general Bernoulli(p) and
matched-pairs designs, with a brute-force oracle and a simulation harness.
"""

from .balanced import compute_ab, compute_pmax, confidence_set
from .core import (
    CandidateGrid,
    ConfidenceResult,
    InputError,
    ObservedCounts,
    ScaledThreshold,
    TestLedger,
    candidate_grid,
    counts_from_units,
)
from .general import confidence_set_general, feasible_v_iter
from .oracle import oracle_confidence_set, oracle_pmax
from .pairs import (
    PairObservedCounts,
    compute_pmax_pairs,
    confidence_set_pairs,
    lex_max_m2m1,
    pair_reduce,
)
from .simulate import SimulationConfig, SimulationReport, presets, simulate, wald_ci

__all__ = [
    "CandidateGrid",
    "ConfidenceResult",
    "InputError",
    "ObservedCounts",
    "PairObservedCounts",
    "ScaledThreshold",
    "SimulationConfig",
    "SimulationReport",
    "TestLedger",
    "candidate_grid",
    "compute_ab",
    "compute_pmax",
    "compute_pmax_pairs",
    "confidence_set",
    "confidence_set_general",
    "confidence_set_pairs",
    "counts_from_units",
    "feasible_v_iter",
    "lex_max_m2m1",
    "oracle_confidence_set",
    "oracle_pmax",
    "pair_reduce",
    "presets",
    "simulate",
    "wald_ci",
]

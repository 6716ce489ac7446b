"""Optimistic no-regret policies for discrete caching, with the rounding
subroutines, prediction oracles, trace generators, offline benchmarks, and a
trace-driven experiment harness."""

from .core import (
    ContractViolation,
    CumulativeGradient,
    FractionalAllocation,
    IntegralCacheSet,
    LibraryConfig,
    PredictionErrorLedger,
    PredictionVector,
    RequestEvent,
    error_increments,
)
from .policies import (
    BipartiteAction,
    ExpertsCache,
    FtplBaseline,
    FtrlBaseline,
    OftplCache,
    OftplUneqCache,
    OftrlBipCache,
    OftrlCache,
    OftrlUneqCache,
)
from .projections import BipartitePoint, BipartitePolytopeSpec

__all__ = [
    "BipartiteAction",
    "BipartitePoint",
    "BipartitePolytopeSpec",
    "ContractViolation",
    "CumulativeGradient",
    "ExpertsCache",
    "FractionalAllocation",
    "FtplBaseline",
    "FtrlBaseline",
    "IntegralCacheSet",
    "LibraryConfig",
    "OftplCache",
    "OftplUneqCache",
    "OftrlBipCache",
    "OftrlCache",
    "OftrlUneqCache",
    "PredictionErrorLedger",
    "PredictionVector",
    "RequestEvent",
    "error_increments",
]

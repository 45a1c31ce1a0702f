"""Strategic decision circuits from fight-participation time series."""

from .circuit_builder import (Circuit, CircuitEdge, CircuitVariant, EmptyFamily, Perturbation, build_family,
                              null_circuit, perturb_circuit)
from .circuit_simulator import SimConfig, planted_circuit, simulate, step
from .event_store import (FightEvent, FightSeries, Roster, filter_min_size, load_series, participation_counts,
                          save_series)
from .metrics import (ComparisonReport, DegeneracyReport, FightSizeDistribution, compare, degeneracy_scan,
                      fight_size_distribution, rank_family)
from .null_model import NullConfig, NullStats, null_stats, permute_series
from .sparse_coding import SparseBasis, SparseGroup, extract_groups, fit_sparse_code, sparse_extract_all
from .strategy_extraction import (DeltaPEdge, EnrichmentReport, StrategyClass, class_enrichment, delta_p,
                                  extract_all, follow_count, source_count)

__version__ = "0.1.0"

__all__ = [
    "Circuit", "CircuitEdge", "CircuitVariant", "ComparisonReport", "DegeneracyReport", "DeltaPEdge",
    "EmptyFamily", "EnrichmentReport", "FightEvent", "FightSeries", "FightSizeDistribution", "NullConfig",
    "NullStats", "Perturbation", "Roster", "SimConfig", "SparseBasis", "SparseGroup", "StrategyClass",
    "build_family", "class_enrichment", "compare", "degeneracy_scan", "delta_p", "extract_all",
    "extract_groups", "fight_size_distribution", "filter_min_size", "fit_sparse_code", "follow_count",
    "load_series", "null_circuit", "null_stats", "participation_counts", "permute_series", "perturb_circuit",
    "planted_circuit", "rank_family", "save_series", "simulate", "source_count", "sparse_extract_all", "step",
]

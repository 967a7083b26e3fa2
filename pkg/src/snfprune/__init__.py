"""Structured filter-pruning planner.

Given a conv network's weights and a target FLOPs reduction, search the
number of filters to reserve per layer from the spectra of centered filter
matrices, pick which filters survive by an importance criterion, and emit
a pruning plan plus a physically pruned weight archive.
"""

from snfprune._kernels import BACKEND
from snfprune.allocator import (Allocation, SearchResult, allocation_for_beta,
                                curve_beta_vs_d, curve_error_vs_ratio,
                                random_allocation, search_beta, total_error,
                                uniform_allocation)
from snfprune.criteria import (CriterionKind, score_filters, select_kept,
                               select_kept_grouped)
from snfprune.netgraph import (FlopsReport, GraphError, LayerSpec, NetworkSpec,
                               achieved_reduction, flops, forward_eval,
                               load_network, save_network, validate_network)
from snfprune.pruner import (PlanLayer, PruningPlan, apply_plan, build_plan,
                             load_plan, report, save_plan)
from snfprune.scaffold import TEMPLATES, scaffold
from snfprune.spectrum import (FilterMatrix, LayerSpectrum, build_filter_matrix,
                               center, gram_spectrum, layer_spectra,
                               reconstruction_error, reserved_count,
                               symmetric_eigen, tail_error)
from snfprune.tensorio import (ArchiveError, WeightArchive, read_archive,
                               write_archive)

__version__ = "0.1.0"
__all__ = [
    "Allocation", "ArchiveError", "BACKEND", "CriterionKind", "FilterMatrix",
    "FlopsReport", "GraphError", "LayerSpec", "LayerSpectrum", "NetworkSpec",
    "PlanLayer", "PruningPlan", "SearchResult", "TEMPLATES", "WeightArchive",
    "achieved_reduction", "allocation_for_beta", "apply_plan",
    "build_filter_matrix", "build_plan", "center", "curve_beta_vs_d",
    "curve_error_vs_ratio", "flops", "forward_eval", "gram_spectrum",
    "layer_spectra", "load_network", "load_plan", "random_allocation",
    "read_archive", "reconstruction_error", "report", "reserved_count",
    "save_network", "save_plan", "scaffold", "score_filters", "search_beta",
    "select_kept", "select_kept_grouped", "symmetric_eigen", "tail_error",
    "total_error", "uniform_allocation", "validate_network", "write_archive",
]

from bisformer.metrics.agreement import CccResult, bootstrap_ccc, ccc, ccc_value
from bisformer.metrics.binned import (
    MUTATION_MAGNITUDES,
    MutationStats,
    binned_test_error,
    error_reduction,
    maintenance_mutation_stats,
    mutation_stats,
)
from bisformer.metrics.clinical import (
    CaseMetrics,
    PeriodMetrics,
    case_metrics,
    cohort_summary,
    performance_errors,
)
from bisformer.metrics.periods import PERIODS, PeriodSplit, split_periods
from bisformer.metrics.reports import (
    binned_error_frame,
    ccc_table,
    error_reduction_frame,
    mutation_frame,
    summary_table,
)

__all__ = [
    "MUTATION_MAGNITUDES",
    "PERIODS",
    "CaseMetrics",
    "CccResult",
    "MutationStats",
    "PeriodMetrics",
    "PeriodSplit",
    "binned_error_frame",
    "binned_test_error",
    "bootstrap_ccc",
    "case_metrics",
    "ccc",
    "ccc_table",
    "ccc_value",
    "cohort_summary",
    "error_reduction",
    "error_reduction_frame",
    "maintenance_mutation_stats",
    "mutation_frame",
    "mutation_stats",
    "performance_errors",
    "split_periods",
    "summary_table",
]

from bisformer.imbalance.lds import (
    N_BINS,
    REGIONS,
    LabelDensity,
    WeightTable,
    bis_bin,
    region_of,
    region_weight_bands,
    smooth_density,
    weights_from_density,
    write_weight_table_csv,
)
from bisformer.imbalance.losses import history_loss, total_objective, weighted_mse

__all__ = [
    "N_BINS",
    "REGIONS",
    "LabelDensity",
    "WeightTable",
    "bis_bin",
    "history_loss",
    "region_of",
    "region_weight_bands",
    "smooth_density",
    "total_objective",
    "weighted_mse",
    "weights_from_density",
    "write_weight_table_csv",
]

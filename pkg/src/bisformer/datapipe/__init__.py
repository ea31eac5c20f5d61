from bisformer.datapipe.binning import bin_case
from bisformer.datapipe.dataset import (
    Dataset,
    DatasetOptions,
    assign_splits,
    build_dataset,
    load_split_manifest,
    read_dataset,
    write_dataset,
)
from bisformer.datapipe.ingest import parse_and_clean
from bisformer.datapipe.lowess import lowess_smooth
from bisformer.datapipe.schema import (
    BIN_SECONDS,
    WINDOW_BINS,
    CaseSeries,
    DoseMode,
    Normalization,
    RawCase,
    SampleBatch,
    TrainingSample,
)
from bisformer.datapipe.windows import build_windows, compute_norms, window_at

__all__ = [
    "BIN_SECONDS",
    "WINDOW_BINS",
    "CaseSeries",
    "Dataset",
    "DatasetOptions",
    "DoseMode",
    "Normalization",
    "RawCase",
    "SampleBatch",
    "TrainingSample",
    "assign_splits",
    "bin_case",
    "build_dataset",
    "build_windows",
    "compute_norms",
    "load_split_manifest",
    "lowess_smooth",
    "parse_and_clean",
    "read_dataset",
    "window_at",
    "write_dataset",
]

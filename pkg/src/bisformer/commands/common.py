"""Helpers shared by commands: worker pools, prediction files and method lists."""
import logging
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd

from bisformer.core.config import RunConfig
from bisformer.core.errors import ConfigError, DataIoError, MisalignedSeries
from bisformer.datapipe.dataset import DATASET_FILE, SPLIT_NAMES, Dataset, read_dataset
from bisformer.utils.files import write_frame_atomic

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

CASES_SUBDIR = "cases"
MODEL_FILE = "model.bisf"
PREDICTION_COLUMNS = ("t", "bis_true", "bis_pred")
DEFAULT_METHODS = (("model", "predict"), ("pkpd", "baseline-pkpd"))


def parallel_map(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> List[R]:
    """Map over a process pool; results come back in input order whatever the job count."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def dataset_dir(config: RunConfig, explicit: Optional[Path]) -> Path:
    return Path(explicit) if explicit is not None else Path(config.data_dir) / "ingest"


def load_dataset(config: RunConfig, explicit: Optional[Path]) -> Dataset:
    path = dataset_dir(config, explicit)
    if not (path / DATASET_FILE).exists() and not path.is_file():
        raise DataIoError(f"no dataset at {path}; run ingest first", path=str(path))
    return read_dataset(path)


def model_path(config: RunConfig, explicit: Optional[Path]) -> Path:
    return Path(explicit) if explicit is not None else Path(config.data_dir) / "train" / MODEL_FILE


def split_case_ids(dataset: Dataset, split: str) -> List[str]:
    if split == "all":
        return list(dataset.cases)
    if split not in SPLIT_NAMES:
        raise ConfigError(f"unknown split '{split}'")
    return list(dataset.splits[split])


def prediction_frame(times, true, pred) -> pd.DataFrame:
    times = np.asarray(times, dtype=np.int64)
    if not len(times) == len(true) == len(pred):
        raise MisalignedSeries("prediction columns differ in length", t=len(times), true=len(true), pred=len(pred))
    return pd.DataFrame({"t": times, "bis_true": np.asarray(true, dtype=np.float64),
                         "bis_pred": np.asarray(pred, dtype=np.float64)})


def write_predictions(out_dir: Path, case_id: str, frame: pd.DataFrame) -> Path:
    return write_frame_atomic(Path(out_dir) / CASES_SUBDIR / f"{case_id}.csv", frame)


def read_predictions(directory: Path) -> "OrderedDict[str, pd.DataFrame]":
    """Per-case prediction CSVs of one method, ordered by case id."""
    cases_dir = Path(directory) / CASES_SUBDIR
    if not cases_dir.is_dir():
        raise DataIoError(f"no prediction directory {cases_dir}", path=str(cases_dir))
    out: "OrderedDict[str, pd.DataFrame]" = OrderedDict()
    for path in sorted(cases_dir.glob("*.csv")):
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError) as e:
            raise DataIoError(f"cannot read predictions {path}: {e}", path=str(path))
        missing = [c for c in PREDICTION_COLUMNS if c not in frame.columns]
        if missing:
            raise DataIoError(f"{path} lacks columns {missing}", path=str(path))
        out[path.stem] = frame
    if not out:
        raise DataIoError(f"no prediction files in {cases_dir}", path=str(cases_dir))
    return out


def parse_method_specs(specs: Optional[Iterable[str]], data_dir: Path) -> "OrderedDict[str, Path]":
    """NAME=DIR pairs; without any, the predict and baseline-pkpd outputs that exist."""
    methods: "OrderedDict[str, Path]" = OrderedDict()
    for spec in specs or []:
        name, sep, directory = spec.partition("=")
        if not sep or not name or not directory:
            raise ConfigError(f"method must be NAME=DIR, got '{spec}'")
        if name in methods:
            raise ConfigError(f"method '{name}' given twice")
        methods[name] = Path(directory)
    if not methods:
        for name, sub in DEFAULT_METHODS:
            if (Path(data_dir) / sub / CASES_SUBDIR).is_dir():
                methods[name] = Path(data_dir) / sub
    if not methods:
        raise ConfigError("no methods to evaluate; pass --method NAME=DIR")
    return methods


def common_cases(predictions: Dict[str, "OrderedDict[str, pd.DataFrame]"]) -> List[str]:
    sets = [set(p) for p in predictions.values()]
    shared = sorted(set.intersection(*sets))
    dropped = sorted(set.union(*sets) - set(shared))
    if dropped:
        logger.warning(f"Evaluating {len(shared)} cases shared by all methods; skipping {dropped}")
    return shared

"""Dataset assembly, splits and the BISD dataset file with its sidecars."""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from bisformer.core.config import LdsConfig, SplitConfig
from bisformer.core.errors import ConfigError, DataError, DataIoError, DatasetFormatError
from bisformer.datapipe.lowess import lowess_smooth
from bisformer.datapipe.schema import WINDOW_BINS, CaseSeries, Normalization, SampleBatch
from bisformer.datapipe.windows import build_windows, compute_norms
from bisformer.imbalance.lds import (
    LabelDensity,
    WeightTable,
    smooth_density,
    weights_from_density,
    write_weight_table_csv,
)
from bisformer.pkpd.params import PdParams
from bisformer.pkpd.patient import Patient
from bisformer.pkpd.response import pkpd_pseudo_bis
from bisformer.utils.binary import pack_container, unpack_container
from bisformer.utils.files import write_bytes_atomic
from bisformer.utils.json_store import read_json_file, write_json_file

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"BISD"
DATASET_FILE = "dataset.bin"
NORMS_FILE = "norms.json"
SPLITS_FILE = "splits.json"
WEIGHT_TABLE_FILE = "weight_table.csv"
SPLIT_NAMES = ("train", "val", "test")
CASE_ARRAYS = ("ppf_dose", "rftn_dose", "bis", "pseudo")
SAMPLE_ARRAYS = ("x_drug", "x_pseudo", "statics", "y_history", "y_target", "weight", "times")


@dataclass
class DatasetOptions:
    sample_stride: int = 10
    eval_stride: int = 1
    lowess_frac: float = 0.03
    window_bins: int = WINDOW_BINS
    lds: LdsConfig = field(default_factory=LdsConfig)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sample_stride": self.sample_stride,
            "eval_stride": self.eval_stride,
            "lowess_frac": self.lowess_frac,
            "window_bins": self.window_bins,
            "lds": self.lds.model_dump(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetOptions":
        return cls(
            sample_stride=int(data["sample_stride"]),
            eval_stride=int(data["eval_stride"]),
            lowess_frac=float(data["lowess_frac"]),
            window_bins=int(data["window_bins"]),
            lds=LdsConfig(**data["lds"]),
        )


@dataclass
class Dataset:
    cases: "OrderedDict[str, CaseSeries]"
    pseudo: Dict[str, np.ndarray]
    splits: Dict[str, List[str]]
    norms: Normalization
    samples: Dict[str, SampleBatch]
    weight_table: Optional[WeightTable]
    options: DatasetOptions

    def split_cases(self, split: str) -> List[CaseSeries]:
        return [self.cases[cid] for cid in self.splits[split]]

    def windows(self, split: str) -> SampleBatch:
        """Stored training windows, or unsmoothed per-second windows of another split."""
        if split == "train":
            return self.samples["train"]
        if split not in self.splits:
            raise DataError(f"unknown split '{split}'")
        return SampleBatch.concat([self.case_windows(cid) for cid in self.splits[split]])

    def case_windows(self, case_id: str) -> SampleBatch:
        return build_windows(
            self.cases[case_id], self.pseudo[case_id], self.norms, table=self.weight_table,
            stride=self.options.eval_stride, window_bins=self.options.window_bins,
        )


def assign_splits(case_ids: Sequence[str], config: SplitConfig, seed: int) -> Dict[str, List[str]]:
    """Seeded shuffle of case ids into train/val/test; the train split is never empty."""
    ids = sorted(case_ids)
    if not ids:
        raise DataError("no accepted cases to split")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    n_train = max(1, int(round(config.train * n)))
    n_val = min(n - n_train, int(round(config.val * n)))
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train:n_train + n_val],
        "test": shuffled[n_train + n_val:],
    }


def load_split_manifest(path: Union[str, Path], available: Sequence[str]) -> Dict[str, List[str]]:
    error, data = read_json_file(str(path))
    if error:
        raise ConfigError(error)
    if not isinstance(data, dict) or set(data) - set(SPLIT_NAMES):
        raise ConfigError(f"split manifest {path} must map train/val/test to case id lists")
    splits = {name: [str(cid) for cid in data.get(name, [])] for name in SPLIT_NAMES}
    seen: Dict[str, str] = {}
    for name, ids in splits.items():
        for cid in ids:
            if cid in seen:
                raise ConfigError(f"case {cid} appears in both {seen[cid]} and {name}")
            seen[cid] = name
    unknown = sorted(set(seen) - set(available))
    if unknown:
        raise ConfigError(f"split manifest names unknown cases: {unknown}")
    if not splits["train"]:
        raise ConfigError("split manifest has an empty train split")
    return splits


def build_dataset(
    cases: Sequence[CaseSeries],
    splits: Dict[str, List[str]],
    options: Optional[DatasetOptions] = None,
    pd_params: Optional[PdParams] = None,
) -> Dataset:
    """Pseudo-BIS, norms, smoothed training labels, LDS weights and windowed samples."""
    options = options or DatasetOptions()
    pd_params = pd_params or PdParams()
    by_id = OrderedDict((c.case_id, c) for c in sorted(cases, key=lambda c: c.case_id))
    pseudo = {cid: pkpd_pseudo_bis(c.patient, c, pd_params) for cid, c in by_id.items()}

    train_cases = [by_id[cid] for cid in splits["train"]]
    norms = compute_norms(train_cases)
    # validation and test labels are left unsmoothed
    smoothed = {c.case_id: np.clip(lowess_smooth(c.bis, options.lowess_frac), 0.0, 100.0) for c in train_cases}

    train = SampleBatch.concat([
        build_windows(
            c, pseudo[c.case_id], norms, labels=smoothed[c.case_id],
            stride=options.sample_stride, window_bins=options.window_bins, baseline_bis=pd_params.bis0,
        )
        for c in train_cases
    ])
    if not len(train):
        raise DataError("training split produced no samples")
    density = smooth_density(train.y_target, options.lds.sigma, options.lds.radius)
    table = weights_from_density(density, options.lds.w_cap)
    samples = {"train": train.with_weights(table.lookup(train.y_target))}
    logger.info(
        f"Built dataset: {len(train)} training windows from {len(train_cases)} cases, "
        f"{len(splits['val'])} validation and {len(splits['test'])} test cases"
    )
    return Dataset(by_id, pseudo, splits, norms, samples, table, options)


def _patient_dict(p: Patient) -> Dict[str, Any]:
    return p.model_dump(mode="json")


def encode_dataset(dataset: Dataset) -> bytes:
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    case_meta = []
    for cid, case in dataset.cases.items():
        case_meta.append({
            "case_id": cid,
            "patient": _patient_dict(case.patient),
            "t_induction_start": case.t_induction_start,
            "t_propofol_stop": case.t_propofol_stop,
            "t_end": case.t_end,
            "t_origin": case.t_origin,
        })
        for name, values in zip(CASE_ARRAYS, (case.ppf_dose, case.rftn_dose, case.bis, dataset.pseudo[cid])):
            arrays[f"case/{cid}/{name}"] = values
    for split, batch in dataset.samples.items():
        for name in SAMPLE_ARRAYS:
            arrays[f"samples/{split}/{name}"] = getattr(batch, name)
    header = {
        "kind": "bisformer-dataset",
        "cases": case_meta,
        "splits": dataset.splits,
        "sample_case_ids": {split: [str(c) for c in b.case_ids] for split, b in dataset.samples.items()},
        "norms": dataset.norms.model_dump(),
        "options": dataset.options.to_dict(),
    }
    if dataset.weight_table is not None:
        arrays["lds/empirical"] = dataset.weight_table.density.empirical
        arrays["lds/smoothed"] = dataset.weight_table.density.smoothed
        arrays["lds/weight"] = dataset.weight_table.w
    return pack_container(DATASET_MAGIC, header, arrays)


def decode_dataset(payload: bytes) -> Dataset:
    header, arrays = unpack_container(payload, DATASET_MAGIC, DatasetFormatError)
    try:
        options = DatasetOptions.from_dict(header["options"])
        norms = Normalization(**header["norms"])
        cases: "OrderedDict[str, CaseSeries]" = OrderedDict()
        pseudo: Dict[str, np.ndarray] = {}
        for meta in header["cases"]:
            cid = meta["case_id"]
            cases[cid] = CaseSeries(
                case_id=cid,
                patient=Patient(**meta["patient"]),
                ppf_dose=arrays[f"case/{cid}/ppf_dose"],
                rftn_dose=arrays[f"case/{cid}/rftn_dose"],
                bis=arrays[f"case/{cid}/bis"],
                t_induction_start=int(meta["t_induction_start"]),
                t_propofol_stop=int(meta["t_propofol_stop"]),
                t_end=int(meta["t_end"]),
                t_origin=float(meta["t_origin"]),
            )
            pseudo[cid] = arrays[f"case/{cid}/pseudo"]
        samples = {}
        for split, ids in header["sample_case_ids"].items():
            columns = {name: arrays[f"samples/{split}/{name}"] for name in SAMPLE_ARRAYS}
            samples[split] = SampleBatch(case_ids=np.array(ids, dtype=object), **columns)
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"invalid dataset file: {e}")
    table = None
    if "lds/weight" in arrays:
        density = LabelDensity(
            arrays["lds/empirical"], arrays["lds/smoothed"], options.lds.sigma, options.lds.radius
        )
        table = WeightTable(w=arrays["lds/weight"], density=density)
    return Dataset(cases, pseudo, header["splits"], norms, samples, table, options)


def write_dataset(out_dir: Union[str, Path], dataset: Dataset) -> Path:
    out_dir = Path(out_dir)
    path = write_bytes_atomic(out_dir / DATASET_FILE, encode_dataset(dataset))
    for name, data in ((NORMS_FILE, dataset.norms.model_dump()), (SPLITS_FILE, dataset.splits)):
        error = write_json_file(str(out_dir / name), data)
        if error:
            raise DataIoError(error)
    if dataset.weight_table is not None:
        write_weight_table_csv(out_dir / WEIGHT_TABLE_FILE, dataset.weight_table)
    return path


def read_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    if path.is_dir():
        path = path / DATASET_FILE
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise DataIoError(f"cannot read dataset {path}: {e}")
    return decode_dataset(payload)

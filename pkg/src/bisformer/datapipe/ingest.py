import io
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from bisformer.core.errors import DataIoError, RejectedCase
from bisformer.datapipe.schema import CASE_COLUMNS, DoseMode, RawCase
from bisformer.pkpd.patient import Patient

logger = logging.getLogger(__name__)

MAX_GAP_SECONDS = 30
HEADER_KEYS = ("case_id", "age", "sex", "weight", "height")
VALUE_COLUMNS = ("ppf_dose", "rftn_dose", "bis")


def _reject(reason: str, case_id: str, message: str) -> RejectedCase:
    logger.warning(f"Rejected case {case_id or '<unknown>'} ({reason}): {message}")
    return RejectedCase(reason, case_id=case_id, message=message)


def _split_header(text: str) -> Tuple[Dict[str, str], str]:
    header: Dict[str, str] = {}
    body: List[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if sep:
                header[key.strip().lower()] = value.strip()
        elif line.strip():
            body.append(line)
    return header, "\n".join(body)


def longest_missing_run(values: pd.Series) -> int:
    missing = values.isna().to_numpy()
    if not missing.any():
        return 0
    # run lengths of consecutive True values
    edges = np.diff(np.concatenate(([0], missing.astype(np.int8), [0])))
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    return int((stops - starts).max())


def parse_and_clean(path: Union[str, Path]) -> RawCase:
    """Read a case CSV, interpolate nulls and outliers, and reject unusable records.

    Rejections: `malformed` (header or table unreadable), `gap` (a signal is missing
    for more than 30 consecutive seconds) and `partial` (the record starts mid-infusion
    or never returns to zero propofol).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataIoError(f"cannot read case file {path}: {e}")
    header, body = _split_header(text)
    case_id = header.get("case_id") or path.stem

    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise _reject("malformed", case_id, f"header lacks {', '.join(missing)}")
    try:
        patient = Patient(
            age=int(float(header["age"])),
            sex=header["sex"].lower(),
            weight=float(header["weight"]),
            height=float(header["height"]),
        )
        dose_mode = DoseMode(header.get("dose_mode", DoseMode.PER_SECOND.value).lower())
    except (ValueError, ValidationError) as e:
        raise _reject("malformed", case_id, f"invalid header: {e}")

    try:
        frame = pd.read_csv(io.StringIO(body))
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise _reject("malformed", case_id, f"unreadable table: {e}")
    if tuple(frame.columns) != CASE_COLUMNS:
        raise _reject("malformed", case_id, f"columns {list(frame.columns)} != {list(CASE_COLUMNS)}")
    frame = frame.apply(pd.to_numeric, errors="coerce")
    if frame.empty or frame["t"].isna().any():
        raise _reject("malformed", case_id, "missing or non-numeric timestamps")
    t = frame["t"].to_numpy()
    if np.any(np.diff(t) <= 0) or np.any(t != np.round(t)):
        raise _reject("malformed", case_id, "timestamps must be strictly increasing whole seconds")

    if dose_mode is DoseMode.CUMULATIVE:
        for column in ("ppf_dose", "rftn_dose"):
            cumulative = frame[column]
            frame[column] = cumulative.diff().fillna(cumulative.iloc[0])

    frame = frame.astype({"t": np.int64}).set_index("t")
    frame = frame.reindex(pd.RangeIndex(int(t[0]), int(t[-1]) + 1, name="t"))
    frame.loc[(frame["bis"] < 0) | (frame["bis"] > 100), "bis"] = np.nan
    for column in ("ppf_dose", "rftn_dose"):
        frame.loc[frame[column] < 0, column] = np.nan

    for column in VALUE_COLUMNS:
        run = longest_missing_run(frame[column])
        if run > MAX_GAP_SECONDS:
            raise _reject("gap", case_id, f"{column} missing for {run} consecutive seconds")
        if frame[column].isna().all():
            raise _reject("gap", case_id, f"{column} has no valid values")

    frame = frame.interpolate(method="linear", limit_direction="both")

    ppf = frame["ppf_dose"].to_numpy()
    if ppf[0] > 0:
        raise _reject("partial", case_id, "record starts during propofol infusion")
    nonzero = np.flatnonzero(ppf > 0)
    if len(nonzero) and nonzero[-1] == len(ppf) - 1:
        raise _reject("partial", case_id, "record ends during propofol infusion")

    logger.debug(f"Parsed case {case_id}: {len(frame)} s")
    return RawCase(case_id=case_id, patient=patient, frame=frame.reset_index(), dose_mode=dose_mode)

import os
import tempfile
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]


def ensure_directory(path: PathLike) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_bytes_atomic(path: PathLike, payload: bytes) -> Path:
    """Write via a temp file in the target directory, then rename over the target."""
    path = Path(path)
    ensure_directory(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return path


def write_text_atomic(path: PathLike, content: str) -> Path:
    return write_bytes_atomic(path, content.encode('utf-8'))


def write_frame_atomic(path: PathLike, frame, **to_csv_kwargs) -> Path:
    # pandas DataFrame -> CSV with a stable line terminator
    to_csv_kwargs.setdefault("index", False)
    to_csv_kwargs.setdefault("lineterminator", "\n")
    return write_text_atomic(path, frame.to_csv(**to_csv_kwargs))

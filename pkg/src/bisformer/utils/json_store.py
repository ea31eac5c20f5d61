import json
import os
from typing import Any, Optional

from bisformer.utils.files import write_text_atomic


def read_json_file(path: str, default: Any = None) -> tuple[Optional[str], Any]:
    if not os.path.exists(path):
        return f"File not found: {path}", default

    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        return None, data
    except json.JSONDecodeError as e:
        return f"Invalid JSON in {path}: {e}", default
    except OSError as e:
        return f"Error reading {path}: {e}", default


def dump_json(data: Any, indent: int = 2) -> str:
    return json.dumps(data, indent=indent, ensure_ascii=False, sort_keys=True) + "\n"


def write_json_file(path: str, data: Any, indent: int = 2) -> Optional[str]:
    try:
        write_text_atomic(path, dump_json(data, indent))
        return None
    except (OSError, TypeError, ValueError) as e:
        return f"Error writing to {path}: {e}"

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from bisformer import __version__
from bisformer.commands.manager import CommandManager
from bisformer.core.config import Settings
from bisformer.core.errors import ConfigError
from bisformer.core.models import CommandResult
from bisformer.utils.json_store import write_json_file

ERROR_REPORT_FILE = "error_report.json"


def build_parser(manager: CommandManager) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bisformer",
        description="Depth-of-anesthesia (BIS) prediction from propofol and remifentanil infusions",
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    manager.add_subparsers(parser)
    return parser


def _report_failure(result: CommandResult, args: argparse.Namespace, settings: Optional[Settings]) -> None:
    payload = result.model_dump()
    print(json.dumps(payload, indent=2, default=str), file=sys.stderr)
    out_dir = getattr(args, "out", None)
    if out_dir is None and settings is not None and getattr(args, "command", None):
        out_dir = Path(getattr(args, "data_dir", None) or settings.data_dir) / args.command
    # a failed command never creates its output directory just for the report
    if out_dir is not None and Path(out_dir).is_dir():
        write_json_file(str(Path(out_dir) / ERROR_REPORT_FILE), payload)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    try:
        settings = Settings()
    except ValidationError as e:
        result = CommandResult.from_error(ConfigError(f"invalid environment settings: {e.errors()[0]['msg']}"))
        print(json.dumps(result.model_dump(), indent=2), file=sys.stderr)
        return result.exit_code

    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    manager = CommandManager(settings)
    args = build_parser(manager).parse_args(argv)

    result = manager.run(args.command, args)
    if result.success:
        logging.getLogger("bisformer").info(result.message)
    else:
        _report_failure(result, args, settings)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())

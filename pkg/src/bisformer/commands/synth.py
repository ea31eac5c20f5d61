import argparse
from functools import partial
from pathlib import Path
from typing import Any, Dict

from bisformer.commands.base import BaseCommand, add_common_arguments
from bisformer.commands.common import parallel_map
from bisformer.core.config import RunConfig, SynthConfig
from bisformer.core.errors import DataIoError
from bisformer.core.models import CommandResult
from bisformer.synth.generator import generate_case, write_case_csv
from bisformer.utils.json_store import write_json_file

MANIFEST_FILE = "manifest.json"


def _generate_one(index: int, cfg: SynthConfig, out_dir: Path) -> Dict[str, Any]:
    case = generate_case(cfg, index)
    write_case_csv(case, out_dir)
    return {
        "case_id": case.case_id,
        "patient": case.patient.model_dump(mode="json"),
        "duration_s": case.duration,
        "t_propofol_stop": case.t_propofol_stop,
        "factors": case.factors,
    }


class SynthCommand(BaseCommand):
    help = "Generate synthetic case CSVs from sampled patients and PK-PD ground truth"

    @staticmethod
    def get_command_name() -> str:
        return "synth"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--cases', type=int, default=None, help="Number of cases")
        parser.add_argument('--noise-sd', type=float, default=None, help="BIS noise standard deviation")
        add_common_arguments(parser)

    def sections(self, args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
        return {"synth": {"n_cases": args.cases, "noise_sd": args.noise_sd}}

    def execute(self, config: RunConfig, args: argparse.Namespace) -> CommandResult:
        out_dir = Path(config.output_dir)
        tracer, session = self.start_trace(config)
        self.write_effective_config(config)

        worker = partial(_generate_one, cfg=config.synth, out_dir=out_dir)
        manifest = parallel_map(worker, list(range(config.synth.n_cases)), config.jobs)
        error = write_json_file(str(out_dir / MANIFEST_FILE), {"cases": manifest})
        if error:
            raise DataIoError(error)
        tracer.log_event(session, "cases_written", {"n_cases": len(manifest)})
        return CommandResult.ok(
            f"Wrote {len(manifest)} synthetic cases to {out_dir}",
            n_cases=len(manifest),
            output_dir=str(out_dir),
        )

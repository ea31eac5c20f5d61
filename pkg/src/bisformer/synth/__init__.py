from bisformer.synth.generator import (
    GeneratedCase,
    TciPump,
    case_csv_text,
    case_rng,
    generate_case,
    generate_case_set,
    plasma_target_for_bis,
    sample_patient,
    write_case_csv,
)

__all__ = [
    "GeneratedCase",
    "TciPump",
    "case_csv_text",
    "case_rng",
    "generate_case",
    "generate_case_set",
    "plasma_target_for_bis",
    "sample_patient",
    "write_case_csv",
]

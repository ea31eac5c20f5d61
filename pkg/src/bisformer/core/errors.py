from typing import Any, Dict, Optional


class BisformerError(Exception):
    code: str = "error"
    exit_code: int = 1

    def __init__(self, message: str = "", **details: Any):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class ConfigError(BisformerError):
    code = "config_error"
    exit_code = 2


class DataIoError(BisformerError):
    code = "io_error"
    exit_code = 3


class DataError(BisformerError):
    code = "data_error"
    exit_code = 4


class PartialRunError(BisformerError):
    code = "partial_run"
    exit_code = 5


class NumericalError(BisformerError):
    code = "numerical_error"
    exit_code = 6


class ModelError(BisformerError):
    code = "model_error"
    exit_code = 7


# pkpd

class NonPositiveLbm(DataError):
    code = "non_positive_lbm"


class NonPositiveParameter(DataError):
    code = "non_positive_parameter"


class NegativeConcentration(NumericalError):
    code = "negative_concentration"


class MisalignedSeries(DataError):
    code = "misaligned_series"


# autodiff / nn

class ShapeMismatch(ModelError):
    code = "shape_mismatch"


class DomainError(NumericalError):
    code = "domain_error"


class NonFiniteValue(NumericalError):
    code = "non_finite_value"


class NonScalarOutput(ModelError):
    code = "non_scalar_output"


class NonFiniteLoss(NumericalError):
    code = "non_finite_loss"

    def __init__(self, batch_index: int, epoch: Optional[int] = None):
        super().__init__(
            f"non-finite loss at batch {batch_index}", batch_index=batch_index, epoch=epoch
        )
        self.batch_index = batch_index


class ModelFormatError(ModelError):
    code = "model_format"


# imbalance

class OutOfRangeTarget(DataError):
    code = "out_of_range_target"


class EmptyDensity(DataError):
    code = "empty_density"


class NonFiniteInput(NumericalError):
    code = "non_finite_input"


# datapipe

class DatasetFormatError(DataError):
    code = "dataset_format"


class RejectedCase(DataError):
    code = "rejected_case"
    REASONS = ("gap", "partial", "malformed")

    def __init__(self, reason: str, case_id: str = "", message: str = ""):
        if reason not in self.REASONS:
            raise ValueError(f"unknown rejection reason '{reason}'")
        super().__init__(message or f"case {case_id!r} rejected: {reason}", reason=reason, case_id=case_id)
        self.reason = reason
        self.case_id = case_id


class EmptyCase(DataError):
    code = "empty_case"


class SeriesTooShort(DataError):
    code = "series_too_short"


class MissingNorms(DataError):
    code = "missing_norms"


# metrics

class MissingAnchor(DataError):
    code = "missing_anchor"


class ZeroTrueValue(DataError):
    code = "zero_true_value"


class DegenerateSeries(DataError):
    code = "degenerate_series"


class WindowExceedsSeries(DataError):
    code = "window_exceeds_series"

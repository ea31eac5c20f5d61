from enum import Enum
from typing import Mapping, Optional

from pydantic import BaseModel, model_validator

from bisformer.core.errors import NonPositiveParameter
from bisformer.pkpd.patient import Patient, compute_lbm


class Drug(str, Enum):
    PROPOFOL = "propofol"
    REMIFENTANIL = "remifentanil"

    @property
    def amount_per_ug(self) -> float:
        # propofol amounts in mg (C in ug/mL), remifentanil in ug (C in ng/mL)
        return 1e-3 if self is Drug.PROPOFOL else 1.0


class PkParams(BaseModel):
    v1: float
    v2: float
    v3: float
    cl1: float
    cl2: float
    cl3: float
    ke0: float

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def validate_positive(self) -> "PkParams":
        bad = {k: v for k, v in self.model_dump().items() if not v > 0}
        if bad:
            raise NonPositiveParameter(f"non-positive PK parameters: {bad}", **bad)
        return self


class RateConstants(BaseModel):
    k10: float
    k12: float
    k21: float
    k13: float
    k31: float

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def validate_rates(self) -> "RateConstants":
        values = self.model_dump()
        if any(v < 0 for v in values.values()):
            raise ValueError(f"rate constants must be non-negative: {values}")
        return self


class PdParams(BaseModel):
    bis0: float = 98.0
    bis_min: float = 0.0
    ec50p: float = 4.47
    ec50r: float = 19.3
    gamma: float = 1.43

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def validate_pd(self) -> "PdParams":
        if not self.bis0 > self.bis_min >= 0:
            raise ValueError("require bis0 > bis_min >= 0")
        if not (self.ec50p > 0 and self.ec50r > 0 and self.gamma > 0):
            raise ValueError("ec50p, ec50r and gamma must be positive")
        return self


def derive_pk_params(p: Patient, drug: Drug, lbm: Optional[float] = None) -> PkParams:
    """Schnider (propofol) or Minto (remifentanil) parameters for one patient.

    Propofol cl1 centres height at 177 cm.
    """
    lbm = compute_lbm(p) if lbm is None else lbm
    age, wgt, hgt = p.age, p.weight, p.height
    if drug is Drug.PROPOFOL:
        values = dict(
            v1=4.27,
            v2=18.9 - 0.391 * (age - 53),
            v3=238.0,
            cl1=1.89 + 0.0456 * (wgt - 77) - 0.0681 * (lbm - 59) + 0.0264 * (hgt - 177),
            cl2=1.29 - 0.024 * (age - 53),
            cl3=0.836,
            ke0=0.46,
        )
    else:
        values = dict(
            v1=5.1 - 0.0201 * (age - 40) + 0.072 * (lbm - 55),
            v2=9.82 - 0.0811 * (age - 40),
            v3=5.42,
            cl1=2.6 - 0.0162 * (age - 40) + 0.0191 * (lbm - 55),
            cl2=2.05 - 0.0301 * (age - 40),
            cl3=0.076 - 0.00113 * (age - 40),
            ke0=0.595 - 0.007 * (age - 40),
        )
    return PkParams(**values)


def derive_rate_constants(pk: PkParams) -> RateConstants:
    return RateConstants(
        k10=pk.cl1 / pk.v1,
        k12=pk.cl2 / pk.v1,
        k21=pk.cl2 / pk.v2,
        k13=pk.cl3 / pk.v1,
        k31=pk.cl3 / pk.v3,
    )


def scale_pk_params(pk: PkParams, factors: Mapping[str, float]) -> PkParams:
    unknown = set(factors) - set(PkParams.model_fields)
    if unknown:
        raise ValueError(f"unknown PK parameters: {sorted(unknown)}")
    return PkParams(**{k: v * factors.get(k, 1.0) for k, v in pk.model_dump().items()})

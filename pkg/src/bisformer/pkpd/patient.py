from enum import Enum

import numpy as np
from pydantic import BaseModel, Field

from bisformer.core.errors import NonPositiveLbm


class Sex(str, Enum):
    MALE = "male"
    FEMALE = "female"


class Patient(BaseModel):
    age: int = Field(..., ge=0, le=130, description="years")
    sex: Sex
    weight: float = Field(..., gt=0, le=400, description="kg")
    height: float = Field(..., gt=50, le=260, description="cm")

    model_config = {"frozen": True}

    def static_vector(self) -> np.ndarray:
        """Raw covariates in model order: age, sex (male = 1), weight, height."""
        return np.array(
            [float(self.age), 1.0 if self.sex == Sex.MALE else 0.0, self.weight, self.height],
            dtype=np.float64,
        )


def compute_lbm(p: Patient) -> float:
    """Lean body mass (kg) by the James formula used with the Schnider model."""
    ratio = p.weight / p.height
    if p.sex == Sex.MALE:
        lbm = 1.1 * p.weight - 128.0 * ratio ** 2
    else:
        lbm = 1.07 * p.weight - 140.0 * ratio ** 2
    if not lbm > 0:
        raise NonPositiveLbm(
            f"lean body mass {lbm:.3f} kg is not positive",
            sex=p.sex.value, weight=p.weight, height=p.height,
        )
    return lbm

from typing import List, Optional

from pydantic import BaseModel, Field


class EpochRecord(BaseModel):
    epoch: int
    lr: float
    objective: float
    history_loss: float
    weighted_mse: float
    n_batches: int


class TrainingLog(BaseModel):
    records: List[EpochRecord] = Field(default_factory=list)
    initial_objective: Optional[float] = None

    model_config = {"frozen": False}

    def with_epoch(self, record: EpochRecord) -> "TrainingLog":
        return self.model_copy(update={"records": self.records + [record]})

    def with_initial(self, objective: float) -> "TrainingLog":
        return self.model_copy(update={"initial_objective": objective})

    @property
    def final_objective(self) -> Optional[float]:
        return self.records[-1].objective if self.records else None

    def to_rows(self) -> List[dict]:
        return [r.model_dump() for r in self.records]

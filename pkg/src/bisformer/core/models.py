from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from bisformer.core.errors import BisformerError


class CommandResult(BaseModel):
    success: bool = Field(..., description="Whether the command completed for every case")
    message: str = Field(..., description="Human-readable result message")
    exit_code: int = Field(0, description="Process exit status")
    data: Optional[Dict[str, Any]] = Field(None, description="Optional structured data")
    error: Optional[Dict[str, Any]] = Field(None, description="Error payload if the command failed")

    model_config = ConfigDict(validate_assignment=True)

    @classmethod
    def ok(cls, message: str, **data: Any) -> "CommandResult":
        return cls(success=True, message=message, data=data or None)

    @classmethod
    def from_error(cls, error: Exception) -> "CommandResult":
        if isinstance(error, BisformerError):
            return cls(
                success=False,
                message=error.message,
                exit_code=error.exit_code,
                error=error.to_dict(),
            )
        return cls(
            success=False,
            message=f"unexpected failure: {error}",
            exit_code=1,
            error={"code": "unexpected", "message": str(error), "details": {"type": type(error).__name__}},
        )

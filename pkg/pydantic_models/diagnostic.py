from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from models.system import SkewProduct


class SampleDiagnosticIn(BaseModel):
    sample: List[int] = Field(..., min_length=2)
    n: int = Field(..., ge=1)
    k: int = Field(1, ge=1)
    k0: int = Field(2, ge=1)
    k1: int = Field(8, ge=2)
    eps: float = Field(0.1, gt=0)
    delta: float = Field(0.1, gt=0)
    floor: Optional[int] = Field(None, ge=1)


class RwmIn(BaseModel):
    system: SkewProduct
    pairs: Tuple[str, ...] = ("fiber_half",)
    schedule: List[int] = Field([64, 256], min_length=1)
    past: Optional[int] = Field(None, ge=0)
    tol: float = 0.05
    windows: int = Field(128, ge=1)
    seed: int = Field(0, ge=0)

    @field_validator("schedule")
    @classmethod
    def check_schedule(cls, value):
        if any(length < 1 for length in value):
            raise ValueError("orbit lengths must be positive")
        return value


class RelmixIn(BaseModel):
    system: SkewProduct
    lag: int = Field(16, ge=0)
    windows: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)

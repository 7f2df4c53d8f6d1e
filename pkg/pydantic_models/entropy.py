from typing import List, Optional, Tuple

from pydantic import BaseModel, Field


class EntropyIn(BaseModel):
    sample: List[int] = Field(..., min_length=1)
    n: int = Field(..., ge=1)
    k: Optional[int] = Field(None, ge=0)
    bits: bool = False


class EntropyOut(BaseModel):
    value: float
    units: str
    standard_error: float
    flags: Tuple[str, ...]

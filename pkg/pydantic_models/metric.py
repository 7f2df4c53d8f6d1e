from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from models.base_model import MAX_ALPHABET


class WordPairIn(BaseModel):
    first: List[int] = Field(..., min_length=1)
    second: List[int] = Field(..., min_length=1)


class DistributionIn(BaseModel):
    # keys are space-separated words, as in the distribution CSV
    weights: Dict[str, float] = Field(..., min_length=1)

    @field_validator("weights")
    @classmethod
    def check_words(cls, value):
        for word in value:
            if not all(s.isdigit() and int(s) < MAX_ALPHABET for s in word.split()):
                raise ValueError(f"word {word!r} is not a list of symbols")
        return value


class DistributionPairIn(BaseModel):
    first: DistributionIn
    second: DistributionIn
    exact_limit: Optional[int] = Field(None, ge=1)


class DistanceOut(BaseModel):
    value: float
    method: str = "exact"
    lower_bound: float
    upper_bound: float
    support_sizes: Tuple[int, int]

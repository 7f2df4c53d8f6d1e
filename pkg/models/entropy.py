import math
from typing import Literal, Optional, Tuple

from pydantic import Field

from models.base_model import DomainModel

LN2 = math.log(2)


class EntropyEstimate(DomainModel):
    value: float
    block_length: int = Field(..., ge=1)
    past_length: int = Field(0, ge=0)
    gap: int = Field(0, ge=0)
    sample_length: int
    standard_error: float
    bias_corrected: float
    units: Literal["nats", "bits"] = "nats"
    flags: Tuple[str, ...] = ()

    @property
    def undersampled(self) -> bool:
        return "undersampled" in self.flags

    def in_bits(self) -> "EntropyEstimate":
        if self.units == "bits":
            return self
        return self.model_copy(update={
            "value": self.value / LN2,
            "standard_error": self.standard_error / LN2,
            "bias_corrected": self.bias_corrected / LN2,
            "units": "bits",
        })


class EpsIndependence(DomainModel):
    verdict: bool
    witness: Tuple[int, ...]
    good_mass: float
    mass_slack: float
    column_slack: Optional[float]
    null_columns: Tuple[int, ...] = ()

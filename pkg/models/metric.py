from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import ConfigDict, Field, model_validator

from models.base_model import DomainModel, MARGINAL_TOLERANCE


class Coupling(DomainModel):
    """Joint law of two word distributions; rows follow `source`, columns follow `target`."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    source_words: np.ndarray
    target_words: np.ndarray
    source_weights: np.ndarray
    target_weights: np.ndarray
    joint: np.ndarray

    @model_validator(mode="after")
    def check_marginals(self):
        if self.joint.shape != (len(self.source_weights), len(self.target_weights)):
            raise ValueError("joint shape does not match the marginals")
        if np.any(self.joint < -MARGINAL_TOLERANCE):
            raise ValueError("joint weights must be nonnegative")
        if np.max(np.abs(self.joint.sum(axis=1) - self.source_weights)) > MARGINAL_TOLERANCE:
            raise ValueError("row sums do not reproduce the source marginal")
        if np.max(np.abs(self.joint.sum(axis=0) - self.target_weights)) > MARGINAL_TOLERANCE:
            raise ValueError("column sums do not reproduce the target marginal")
        return self

    def expected_cost(self, cost: np.ndarray) -> float:
        return float(np.sum(self.joint * cost))


class TransportResult(DomainModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: float
    lower_bound: float
    upper_bound: float
    method: Literal["exact", "bounded"]
    support_sizes: Tuple[int, int]
    coupling: Optional[Coupling] = Field(None, exclude=True)

    def provenance(self) -> dict:
        return {
            "method": self.method,
            "support_sizes": list(self.support_sizes),
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
        }

from typing import Any, Dict, Optional, Tuple

from models.base_model import DomainModel

FINITARY_NOTE = (
    "finitary surrogate computed from finite data; "
    "it does not certify the limiting property"
)


class DiagnosticReport(DomainModel):
    statistic: str
    values: Dict[str, float]
    parameters: Dict[str, Any]
    seed: Optional[int] = None
    verdict: Optional[bool] = None
    flags: Tuple[str, ...] = ()
    trace: Tuple[Dict[str, Any], ...] = ()
    note: str = FINITARY_NOTE

    @property
    def value(self) -> float:
        return self.values["value"]

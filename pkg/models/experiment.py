from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import Field, model_validator

from models.base_model import DomainModel
from models.core import Partition
from models.diagnostic import DiagnosticReport
from models.system import SystemModel

EXPERIMENT_LABEL = "empirical analogue"


class CocycleFamily(DomainModel):
    kind: Literal["random_rotation", "random_permutation", "frozen"] = "random_rotation"
    count: int = Field(30, ge=1)
    fiber_grid: int = Field(16, ge=1)
    partition: Optional[Partition] = None


class EntropyParams(DomainModel):
    n: int = Field(1, ge=1)
    past: Optional[int] = Field(1, ge=0)
    margin: float = Field(0.1, ge=0)
    dyadic_level: Optional[int] = None


class RwmParams(DomainModel):
    schedule: Tuple[int, ...] = (64, 256, 1024)
    past: Optional[int] = None
    tol: float = 0.05
    windows: int = Field(128, ge=1)
    pairs: Tuple[str, ...] = ("fiber_half",)


class ClassParams(DomainModel):
    dyadic_level: int = 1
    # False hides the base symbols and watches the fiber arcs alone
    observe_base: bool = False


class VwbParams(ClassParams):
    n: int = Field(4, ge=1)
    k: int = Field(4, ge=1)
    eps: float = 0.1
    floor: Optional[int] = None


class VlbParams(ClassParams):
    n: int = Field(4, ge=1)
    k: int = Field(4, ge=1)
    eps: float = 0.1
    floor: Optional[int] = None
    zero_entropy: bool = False


class KcheckParams(ClassParams):
    n: int = Field(2, ge=1)
    k0: int = Field(2, ge=1)
    k1: int = Field(4, ge=2)
    eps: float = 0.1
    delta: float = 0.1
    entropy_rate: Optional[float] = None


class RelmixParams(DomainModel):
    lag: int = Field(16, ge=0)
    tol: float = 0.1
    windows: int = Field(1000, ge=1)
    # the relative-mixing check is preceded by a K-property check of the base
    base_check: KcheckParams = KcheckParams()


class ExperimentConfig(DomainModel):
    name: str = "experiment"
    base: SystemModel
    cocycles: CocycleFamily = CocycleFamily()
    diagnostic: Dict[str, Dict[str, Any]] = {}
    master_seed: int = Field(0, ge=0)
    sample_length: int = Field(1_000_000, ge=1)
    workers: int = Field(1, ge=1)
    output_dir: Optional[str] = None


class TrialRecord(DomainModel):
    trial: int
    seed: int
    cocycle: Dict[str, Any]
    reports: Tuple[DiagnosticReport, ...]
    passed: bool


class ExperimentResult(DomainModel):
    experiment: str
    label: str = EXPERIMENT_LABEL
    trials: Tuple[TrialRecord, ...]
    pass_rate: Optional[float] = None
    confidence_interval: Optional[Tuple[float, float]] = None
    config: ExperimentConfig
    version: str

    @model_validator(mode="after")
    def check_rate(self):
        if self.trials:
            rate = sum(t.passed for t in self.trials) / len(self.trials)
            if self.pass_rate is None or abs(self.pass_rate - rate) > 1e-12:
                raise ValueError("pass rate does not match the trial records")
        return self

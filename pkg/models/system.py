import math
from fractions import Fraction
from typing import Annotated, FrozenSet, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import ConfigDict, Field, field_validator, model_validator

from models.base_model import DomainModel, PROBABILITY_TOLERANCE, STATIONARY_TOLERANCE
from errors.ergolab_error import DimensionError, HypothesisViolationError
from models.core import Partition

MAX_DENOMINATOR = 2 ** 31
# the f = 1 and f = -1 cells of a T_f triple must agree in mass to this tolerance
BALANCE_TOLERANCE = 1e-9


def _check_probability_vector(values, name):
    if any(v < 0 for v in values):
        raise ValueError(f"{name} has negative entries")
    total = math.fsum(values)
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise ValueError(f"{name} sums to {total!r}, not 1")
    return values


class FiberMap(DomainModel):
    """A measure-preserving bijection of the m-point fiber grid."""

    kind: Literal["rotation", "permutation"] = "rotation"
    steps: int = 0
    table: Optional[Tuple[int, ...]] = None

    @model_validator(mode="after")
    def check_table(self):
        if self.kind == "permutation":
            if self.table is None:
                raise ValueError("permutation fiber map needs a table")
            if sorted(self.table) != list(range(len(self.table))):
                raise ValueError("fiber map table is not a bijection")
        return self

    @classmethod
    def identity(cls) -> "FiberMap":
        return cls(kind="rotation", steps=0)

    @classmethod
    def rotation(cls, steps: int) -> "FiberMap":
        return cls(kind="rotation", steps=steps)

    @classmethod
    def permutation(cls, table) -> "FiberMap":
        return cls(kind="permutation", table=tuple(int(t) for t in table))

    def as_table(self, m: int) -> np.ndarray:
        if self.kind == "rotation":
            return (np.arange(m, dtype=np.int64) + self.steps) % m
        return np.asarray(self.table, dtype=np.int64)


class ConstantCocycle(DomainModel):
    kind: Literal["constant"] = "constant"
    fiber_map: FiberMap = FiberMap.identity()


class CellDrivenCocycle(DomainModel):
    kind: Literal["cell_driven"] = "cell_driven"
    fiber_maps: Tuple[FiberMap, ...] = Field(..., min_length=1)
    # partition of the base states; the base generator partition when omitted
    partition: Optional[Partition] = None


class RandomCocycle(DomainModel):
    kind: Literal["random"] = "random"
    seed: int = Field(..., ge=0)
    # rotation draws one uniform rotation per cell, permutation one uniform grid permutation
    family: Literal["rotation", "permutation"] = "rotation"
    partition: Optional[Partition] = None


CocycleModel = Annotated[
    Union[ConstantCocycle, CellDrivenCocycle, RandomCocycle],
    Field(discriminator="kind"),
]


class BernoulliShift(DomainModel):
    kind: Literal["bernoulli"] = "bernoulli"
    p: Tuple[float, ...] = Field(..., min_length=1)

    @field_validator("p")
    @classmethod
    def check_p(cls, value):
        return _check_probability_vector(value, "p")


class MarkovShift(DomainModel):
    kind: Literal["markov"] = "markov"
    transition: Tuple[Tuple[float, ...], ...] = Field(..., min_length=1)
    stationary: Optional[Tuple[float, ...]] = None

    @model_validator(mode="before")
    @classmethod
    def fill_stationary(cls, data):
        if isinstance(data, dict) and data.get("stationary") is None and data.get("transition"):
            matrix = np.asarray(data["transition"], dtype=float)
            values, vectors = np.linalg.eig(matrix.T)
            vector = np.real(vectors[:, np.argmin(np.abs(values - 1.0))])
            vector = np.abs(vector) / np.abs(vector).sum()
            data = {**data, "stationary": tuple(float(v) for v in vector)}
        return data

    @model_validator(mode="after")
    def check_chain(self):
        n = len(self.transition)
        for row in self.transition:
            if len(row) != n:
                raise ValueError("transition matrix must be square")
            _check_probability_vector(row, "transition row")
        if len(self.stationary) != n:
            raise ValueError("stationary vector has the wrong size")
        # eigen-solve output can miss the 1e-12 sum tolerance by a few ulps
        if abs(math.fsum(self.stationary) - 1.0) > STATIONARY_TOLERANCE:
            raise ValueError("stationary vector must sum to 1")
        drift = np.asarray(self.stationary) @ np.asarray(self.transition) - np.asarray(self.stationary)
        if np.max(np.abs(drift)) > STATIONARY_TOLERANCE:
            raise ValueError("stationary vector does not satisfy pi P = pi")
        return self


class RotationCoding(DomainModel):
    """Rotation x -> x + numerator/denominator on the circle, observed through a grid coding."""

    kind: Literal["rotation"] = "rotation"
    numerator: int = Field(..., ge=0)
    denominator: int = Field(..., ge=1, le=MAX_DENOMINATOR)
    coding: Partition

    @model_validator(mode="after")
    def check_angle(self):
        if self.numerator >= self.denominator:
            raise ValueError("rotation angle must lie in [0, 1)")
        return self

    @property
    def angle(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def grid(self) -> int:
        return self.coding.state_count


class FinitePermutation(DomainModel):
    kind: Literal["permutation"] = "permutation"
    sigma: Tuple[int, ...] = Field(..., min_length=1)

    @field_validator("sigma")
    @classmethod
    def check_bijection(cls, value):
        if sorted(value) != list(range(len(value))):
            raise ValueError("sigma is not a permutation of 0..n-1")
        return value

    @property
    def n(self) -> int:
        return len(self.sigma)


class SkewProduct(DomainModel):
    kind: Literal["skew_product"] = "skew_product"
    base: "SystemModel"
    cocycle: CocycleModel
    fiber_grid: int = Field(..., ge=1)


class Induced(DomainModel):
    kind: Literal["induced"] = "induced"
    base: "SystemModel"
    return_set: FrozenSet[int] = Field(..., min_length=1)
    horizon: int = Field(10 ** 7, ge=1)


class RelIndepProduct(DomainModel):
    kind: Literal["relative_product"] = "relative_product"
    extension: SkewProduct


class TfTriple(DomainModel):
    kind: Literal["t_f"] = "t_f"
    base: "SystemModel"
    cells: Partition
    f_values: Tuple[int, ...] = (0, 1, -1)
    rotation_steps: int
    fiber_grid: int = Field(..., ge=1)

    @model_validator(mode="after")
    def check_f_values(self):
        if len(self.f_values) < self.cells.cell_count:
            raise ValueError("every cell needs an f value")
        if any(v not in (0, 1, -1) for v in self.f_values):
            raise ValueError("f takes values in {0, 1, -1}")
        # services import this module, so the measure helper is resolved at call time
        from services.system_service import SystemService

        if self.cells.state_count != SystemService.state_count(self.base):
            raise DimensionError("cell partition does not match the base state space")
        mu = SystemService.state_measure(self.base)
        f = np.asarray(self.f_values, dtype=np.int64)[self.cells.labels]
        plus, minus = mu[f == 1].sum(), mu[f == -1].sum()
        if abs(plus - minus) > BALANCE_TOLERANCE:
            raise HypothesisViolationError(f"f = 1 and f = -1 cells carry unequal mass {plus:.6g} and {minus:.6g}")
        return self


SystemModel = Annotated[
    Union[BernoulliShift, MarkovShift, RotationCoding, FinitePermutation,
          SkewProduct, Induced, RelIndepProduct, TfTriple],
    Field(discriminator="kind"),
]

SkewProduct.model_rebuild()
Induced.model_rebuild()
RelIndepProduct.model_rebuild()
TfTriple.model_rebuild()


class TrajectorySample(DomainModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: np.ndarray
    cell_count: int = Field(..., ge=1)
    seed: int
    burn_in: int = 0
    return_times: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def check_labels(self):
        if self.labels.ndim != 1 or self.labels.size < 1:
            raise ValueError("labels must be a nonempty 1-d array")
        if self.labels.min() < 0 or self.labels.max() >= self.cell_count:
            raise ValueError("labels outside the declared partition")
        return self

    @property
    def length(self) -> int:
        return int(self.labels.size)

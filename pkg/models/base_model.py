from pydantic import BaseModel, ConfigDict

MAX_ALPHABET = 2 ** 16
PROBABILITY_TOLERANCE = 1e-12
STATIONARY_TOLERANCE = 1e-9
MARGINAL_TOLERANCE = 1e-9


class DomainModel(BaseModel):
    """Immutable base for every value type passed between services."""

    model_config = ConfigDict(frozen=True)

    def to_dict(self):
        return self.model_dump(mode="json")

from typing import Optional

from pydantic.v1 import BaseSettings

VERSION = "0.4.0"


class ErgolabSettings(BaseSettings):
    seed: Optional[int] = None
    workers: int = 1
    exact_limit: int = 10_000
    fiber_grid: int = 2 ** 10
    return_horizon: int = 10 ** 7
    occupancy_floor: int = 100
    log_level: str = "INFO"

    class Config:
        env_prefix = "ERGOLAB_"


settings = ErgolabSettings()


def get_settings() -> ErgolabSettings:
    return settings

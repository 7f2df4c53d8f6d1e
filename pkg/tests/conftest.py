import math

import numpy as np
import pytest

from models.core import Partition
from models.system import (
    BernoulliShift,
    CellDrivenCocycle,
    ConstantCocycle,
    FiberMap,
    FinitePermutation,
    MarkovShift,
    RandomCocycle,
)
from services.system_service import SystemService

GOLDEN = (math.sqrt(5) - 1) / 2


@pytest.fixture
def fair_coin():
    return BernoulliShift(p=(0.5, 0.5))


@pytest.fixture
def sticky_chain():
    return MarkovShift(transition=((0.9, 0.1), (0.5, 0.5)))


@pytest.fixture(scope="session")
def iid_sample():
    return SystemService.sample_states(BernoulliShift(p=(0.5, 0.5)), 200_000, seed=3)


@pytest.fixture(scope="session")
def period_two_sample():
    return SystemService.sample_states(FinitePermutation(sigma=(1, 0)), 20_000, seed=3)


@pytest.fixture(scope="session")
def sturmian_sample():
    grid = 1000
    coding = Partition(cell_of=tuple(0 if c < 382 else 1 for c in range(grid)), cell_count=2)
    rotation = SystemService.rotation_coding(GOLDEN, coding)
    return SystemService.sample_trajectory(rotation, length=100_000, seed=5).labels


@pytest.fixture
def make_extension(fair_coin):
    def _make_extension(cocycle, fiber_grid=8, base=None):
        return SystemService.skew_product(base or fair_coin, cocycle, fiber_grid)

    return _make_extension


@pytest.fixture
def frozen_extension(make_extension):
    return make_extension(ConstantCocycle(), fiber_grid=4)


@pytest.fixture
def random_walk_extension(make_extension):
    # rotate the fiber by one step on symbol 1, stay put on symbol 0
    return make_extension(CellDrivenCocycle(fiber_maps=(FiberMap.identity(), FiberMap.rotation(1))))


@pytest.fixture
def shuffling_extension(make_extension):
    return make_extension(RandomCocycle(seed=17, family="permutation"), fiber_grid=32)

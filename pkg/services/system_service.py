import bisect
import itertools
import logging
import math
from fractions import Fraction

import numpy as np

from errors.ergolab_error import (
    DimensionError,
    HypothesisViolationError,
    InputValidationError,
    ParameterError,
    ReturnTimeOverflowError,
)
from models.core import Partition, WordDistribution
from models.system import (
    MAX_DENOMINATOR,
    BernoulliShift,
    CellDrivenCocycle,
    ConstantCocycle,
    FiberMap,
    FinitePermutation,
    Induced,
    MarkovShift,
    RandomCocycle,
    RelIndepProduct,
    RotationCoding,
    SkewProduct,
    TfTriple,
    TrajectorySample,
)
from services.core_service import CoreService
from settings import get_settings

# fiber starting points come from streams independent of the base stream
FIBER_STREAM = 1
SECOND_FIBER_STREAM = 2
TF_FIRST_STREAM = 3
TF_SECOND_STREAM = 4
# exact block distributions are enumerated only up to this many words
EXACT_WORD_LIMIT = 2 ** 16


class SystemService:

    # construction

    @classmethod
    def rotation_coding(cls, alpha, coding: Partition) -> RotationCoding:
        """Builds a rotation coding, reducing the angle to a fraction with denominator at most 2**31."""
        angle = Fraction(alpha).limit_denominator(MAX_DENOMINATOR) % 1
        return RotationCoding(numerator=angle.numerator, denominator=angle.denominator, coding=coding)

    @classmethod
    def skew_product(cls, base, cocycle, fiber_grid: int = None) -> SkewProduct:
        fiber_grid = fiber_grid or get_settings().fiber_grid
        if isinstance(cocycle, RandomCocycle):
            cocycle = cls.draw_cocycle(base, cocycle, fiber_grid)
        extension = SkewProduct(base=base, cocycle=cocycle, fiber_grid=fiber_grid)
        cls.resolve_cocycle(extension)
        return extension

    @classmethod
    def induce(cls, base, return_set, horizon: int = None) -> Induced:
        return_set = frozenset(int(s) for s in return_set)
        inside = CoreService.indicator(return_set, cls.state_count(base))
        if cls.state_measure(base)[inside].sum() <= 0:
            raise InputValidationError("return set has zero measure")
        return Induced(base=base, return_set=return_set, horizon=horizon or get_settings().return_horizon)

    @classmethod
    def relative_independent_product(cls, extension) -> RelIndepProduct:
        if not isinstance(extension, SkewProduct):
            raise InputValidationError("relative independent products are built over skew products")
        return RelIndepProduct(extension=extension)

    @classmethod
    def t_f_triple(cls, base, cells: Partition, rotation, fiber_grid: int = None,
                   f_values=(0, 1, -1), strict: bool = False) -> TfTriple:
        """Builds T_f over `base`, where f is constant on each cell of `cells`.

        The model refuses unequal f = 1 and f = -1 masses. Masses of 1/4 or more
        are outside the regime where the construction is known to stay loosely
        Bernoulli: refused when strict, logged otherwise.
        """
        fiber_grid = fiber_grid or get_settings().fiber_grid
        steps = int(round(float(rotation) * fiber_grid)) % fiber_grid
        triple = TfTriple(base=base, cells=cells, f_values=tuple(f_values), rotation_steps=steps,
                          fiber_grid=fiber_grid)
        f = np.asarray(f_values, dtype=np.int64)[cells.labels]
        plus = cls.state_measure(base)[f == 1].sum()
        if plus == 0:
            logging.warning("f vanishes identically, both fiber coordinates stay frozen")
        elif plus >= 0.25:
            message = f"f = 1 cell carries mass {plus:.6g}, at least 1/4"
            if strict:
                raise HypothesisViolationError(message)
            logging.warning(message)
        return triple

    # state spaces

    @classmethod
    def state_count(cls, system) -> int:
        match system:
            case BernoulliShift():
                return len(system.p)
            case MarkovShift():
                return len(system.transition)
            case RotationCoding():
                return system.grid
            case FinitePermutation():
                return system.n
            case SkewProduct():
                return cls.state_count(system.base) * system.fiber_grid
            case Induced():
                return cls.state_count(system.base)
            case RelIndepProduct():
                return cls.state_count(system.extension) * system.extension.fiber_grid
            case TfTriple():
                return cls.state_count(system.base) * system.fiber_grid ** 2
        raise InputValidationError(f"unknown system {type(system).__name__}")

    @classmethod
    def state_measure(cls, system) -> np.ndarray:
        match system:
            case BernoulliShift():
                return np.asarray(system.p, dtype=float)
            case MarkovShift():
                return np.asarray(system.stationary, dtype=float)
            case RotationCoding():
                q, grid = system.denominator, system.grid
                # grid cell c holds the points s / q with c*q <= s*grid < (c+1)*q
                bounds = np.array([(c * q + grid - 1) // grid for c in range(grid + 1)], dtype=float)
                return np.diff(bounds) / q
            case FinitePermutation():
                return np.full(system.n, 1.0 / system.n)
            case SkewProduct():
                m = system.fiber_grid
                return np.kron(cls.state_measure(system.base), np.full(m, 1.0 / m))
            case Induced():
                mu = cls.state_measure(system.base)
                restricted = np.where(CoreService.indicator(system.return_set, mu.size), mu, 0.0)
                return restricted / restricted.sum()
            case RelIndepProduct():
                m = system.extension.fiber_grid
                return np.kron(cls.state_measure(system.extension), np.full(m, 1.0 / m))
            case TfTriple():
                m = system.fiber_grid
                return np.kron(cls.state_measure(system.base), np.full(m * m, 1.0 / (m * m)))
        raise InputValidationError(f"unknown system {type(system).__name__}")

    @classmethod
    def generator_partition(cls, system) -> Partition:
        match system:
            case RotationCoding():
                return system.coding
            case Induced():
                return cls.generator_partition(system.base)
            case SkewProduct() | RelIndepProduct() | TfTriple():
                return cls.dyadic_partition(system, None)
        return Partition.discrete(cls.state_count(system))

    @classmethod
    def dyadic_partition(cls, system, level=None, base_partition: Partition = None) -> Partition:
        """Base partition times the fiber partition into 2**level equal arcs.

        level None keeps every fiber grid point apart.
        """
        if isinstance(system, RelIndepProduct):
            base, m, fibers = system.extension.base, system.extension.fiber_grid, 2
        elif isinstance(system, TfTriple):
            base, m, fibers = system.base, system.fiber_grid, 2
        elif isinstance(system, SkewProduct):
            base, m, fibers = system.base, system.fiber_grid, 1
        else:
            raise ParameterError("dyadic partitions are defined on skew products")
        base_partition = base_partition or cls.generator_partition(base)
        if base_partition.state_count != cls.state_count(base):
            raise DimensionError("base partition does not match the base state space")
        arcs = m if level is None else 2 ** level
        if arcs > m:
            raise ParameterError(f"2**{level} arcs do not fit on a grid of {m} points")

        states = np.arange(cls.state_count(system), dtype=np.int64)
        labels = np.zeros(states.size, dtype=np.int64)
        rest = states
        for power in range(fibers):
            labels = labels + (rest % m) * arcs // m * arcs ** power
            rest = rest // m
        labels = base_partition.labels[rest] * arcs ** fibers + labels
        return Partition.from_labels(labels)

    @classmethod
    def dynamical_join(cls, permutation: FinitePermutation, alpha: Partition, window: int) -> Partition:
        """Join of the translates T**j alpha for -window <= j <= window."""
        if alpha.state_count != permutation.n:
            raise DimensionError("partition does not match the permutation")
        sigma = np.asarray(permutation.sigma, dtype=np.int64)
        inverse = np.argsort(sigma)
        joined = alpha
        forward = backward = np.arange(permutation.n, dtype=np.int64)
        for _ in range(window):
            forward, backward = sigma[forward], inverse[backward]
            joined = CoreService.join(joined, Partition.from_labels(alpha.labels[forward]))
            joined = CoreService.join(joined, Partition.from_labels(alpha.labels[backward]))
        return joined

    # cocycles

    @classmethod
    def draw_cocycle(cls, base, cocycle: RandomCocycle, fiber_grid: int) -> CellDrivenCocycle:
        partition = cocycle.partition or cls.generator_partition(base)
        rng = np.random.default_rng(cocycle.seed)
        if cocycle.family == "rotation":
            maps = [FiberMap.rotation(int(s)) for s in rng.integers(fiber_grid, size=partition.cell_count)]
        else:
            maps = [FiberMap.permutation(rng.permutation(fiber_grid)) for _ in range(partition.cell_count)]
        return CellDrivenCocycle(fiber_maps=tuple(maps), partition=partition)

    @classmethod
    def resolve_cocycle(cls, extension: SkewProduct):
        """Returns (cell of each base state, fiber map tables, rotation steps or None)."""
        m = extension.fiber_grid
        base_count = cls.state_count(extension.base)
        cocycle = extension.cocycle
        if isinstance(cocycle, RandomCocycle):
            cocycle = cls.draw_cocycle(extension.base, cocycle, m)
        if isinstance(cocycle, ConstantCocycle):
            cells, maps = np.zeros(base_count, dtype=np.int64), [cocycle.fiber_map]
        else:
            partition = cocycle.partition or cls.generator_partition(extension.base)
            if partition.state_count != base_count:
                raise DimensionError("cocycle partition does not match the base state space")
            if len(cocycle.fiber_maps) != partition.cell_count:
                raise InputValidationError(
                    f"{len(cocycle.fiber_maps)} fiber maps for {partition.cell_count} cells")
            cells, maps = partition.labels, list(cocycle.fiber_maps)
        if any(f.kind == "permutation" and len(f.table) != m for f in maps):
            raise InputValidationError(f"fiber map table does not act on {m} fiber points")
        tables = np.stack([f.as_table(m) for f in maps])
        steps = None
        if all(f.kind == "rotation" for f in maps):
            steps = np.array([f.steps % m for f in maps], dtype=np.int64)
        return cells, tables, steps

    @classmethod
    def _fiber_path(cls, driving, tables, steps, start: int, m: int) -> np.ndarray:
        if steps is not None:
            offsets = np.concatenate(([0], np.cumsum(steps[driving[:-1]])))
            return (start + offsets) % m
        rows = tables.tolist()
        path = np.empty(driving.size, dtype=np.int64)
        u = int(start)
        for t, cell in enumerate(driving.tolist()):
            path[t] = u
            u = rows[cell][u]
        return path

    @classmethod
    def fiber_orbits(cls, extension: SkewProduct, base_windows) -> np.ndarray:
        """Fiber positions along each base window for every fiber starting point.

        base_windows has shape (W, L); the result has shape (W, m, L) and holds
        the fiber coordinate at time i of the orbit started at (window[0], u).
        """
        cells, tables, steps = cls.resolve_cocycle(extension)
        m = extension.fiber_grid
        base_windows = np.asarray(base_windows, dtype=np.int64)
        count, width = base_windows.shape
        driving = cells[base_windows]
        start = np.arange(m, dtype=np.int64)
        if steps is not None:
            offsets = np.concatenate(
                (np.zeros((count, 1), dtype=np.int64), np.cumsum(steps[driving[:, :-1]], axis=1)), axis=1)
            return (start[None, :, None] + offsets[:, None, :]) % m
        positions = np.empty((count, m, width), dtype=np.int64)
        current = np.broadcast_to(start, (count, m)).copy()
        for i in range(width):
            positions[:, :, i] = current
            current = tables[driving[:, i][:, None], current]
        return positions

    @classmethod
    def tabulate(cls, system, f) -> np.ndarray:
        """Values of an observable on every state.

        Callables receive coordinate arrays: (x, u) on skew products, (x, u, v) on
        relative products and T_f triples, x elsewhere.
        """
        size = cls.state_count(system)
        if not callable(f):
            values = np.asarray(f, dtype=float)
            if values.shape != (size,):
                raise DimensionError(f"observable has shape {values.shape}, expected ({size},)")
        else:
            states = np.arange(size, dtype=np.int64)
            if isinstance(system, SkewProduct):
                m = system.fiber_grid
                coordinates = (states // m, states % m)
            elif isinstance(system, (RelIndepProduct, TfTriple)):
                m = system.extension.fiber_grid if isinstance(system, RelIndepProduct) else system.fiber_grid
                coordinates = (states // (m * m), states // m % m, states % m)
            else:
                coordinates = (states,)
            values = np.broadcast_to(np.asarray(f(*coordinates), dtype=float), (size,)).copy()
        if not np.all(np.isfinite(values)):
            raise InputValidationError("observable must be bounded")
        return values

    @classmethod
    def conditional_expectation(cls, extension: SkewProduct, f, y):
        values = cls.tabulate(extension, f).reshape(-1, extension.fiber_grid).mean(axis=1)
        result = values[np.asarray(y, dtype=np.int64)]
        return float(result) if np.ndim(result) == 0 else result

    # sampling

    @classmethod
    def sample_states(cls, system, length: int, seed: int, fiber_start=None) -> np.ndarray:
        """A stationary orbit of discretised states x_0, ..., x_{length-1}."""
        if length < 1:
            raise ParameterError("trajectory length must be positive")
        match system:
            case BernoulliShift():
                rng = np.random.default_rng(seed)
                return rng.choice(len(system.p), size=length, p=np.asarray(system.p))
            case MarkovShift():
                return cls._sample_markov(system, length, seed)
            case RotationCoding():
                rng = np.random.default_rng(seed)
                q, step = system.denominator, system.numerator
                start = int(rng.integers(q))
                points = (start + step * np.arange(length, dtype=np.int64)) % q
                return points * system.grid // q
            case FinitePermutation():
                return cls._sample_permutation(system, length, seed)
            case SkewProduct():
                base_states = cls.sample_states(system.base, length, seed)
                m = system.fiber_grid
                u0 = cls._fiber_start(seed, FIBER_STREAM, m, fiber_start, 0)
                cells, tables, steps = cls.resolve_cocycle(system)
                return base_states * m + cls._fiber_path(cells[base_states], tables, steps, u0, m)
            case Induced():
                states, _ = cls.sample_returns(system, length, seed)
                return states
            case RelIndepProduct():
                extension = system.extension
                m = extension.fiber_grid
                first = cls.sample_states(extension, length, seed,
                                          None if fiber_start is None else fiber_start[:1])
                v0 = cls._fiber_start(seed, SECOND_FIBER_STREAM, m, fiber_start, 1)
                cells, tables, steps = cls.resolve_cocycle(extension)
                return first * m + cls._fiber_path(cells[first // m], tables, steps, v0, m)
            case TfTriple():
                return cls._sample_t_f(system, length, seed, fiber_start)
        raise InputValidationError(f"unknown system {type(system).__name__}")

    @classmethod
    def _fiber_start(cls, seed, stream, m, fiber_start, position) -> int:
        if fiber_start is not None:
            u = int(fiber_start[position])
            if not 0 <= u < m:
                raise DimensionError(f"fiber start {u} outside 0..{m - 1}")
            return u
        return int(np.random.default_rng([seed, stream]).integers(m))

    @classmethod
    def _sample_markov(cls, chain: MarkovShift, length, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        cumulative = np.cumsum(np.asarray(chain.transition), axis=1)
        cumulative[:, -1] = 1.0
        rows = cumulative.tolist()
        initial = np.cumsum(chain.stationary)
        initial[-1] = 1.0
        draws = rng.random(length).tolist()
        state = bisect.bisect_right(initial.tolist(), draws[0])
        states = [state]
        for u in draws[1:]:
            state = bisect.bisect_right(rows[state], u)
            states.append(state)
        return np.asarray(states, dtype=np.int64)

    @classmethod
    def _sample_permutation(cls, permutation: FinitePermutation, length, seed) -> np.ndarray:
        sigma = np.asarray(permutation.sigma, dtype=np.int64)
        state = int(np.random.default_rng(seed).integers(permutation.n))
        # walk the cycle through the start once, then tile it
        cycle = [state]
        while int(sigma[cycle[-1]]) != state:
            cycle.append(int(sigma[cycle[-1]]))
        return np.resize(np.asarray(cycle, dtype=np.int64), length)

    @classmethod
    def _sample_t_f(cls, triple: TfTriple, length, seed, fiber_start) -> np.ndarray:
        base_states = cls.sample_states(triple.base, length, seed)
        m = triple.fiber_grid
        f = np.asarray(triple.f_values, dtype=np.int64)[triple.cells.labels]
        increments = f[base_states[:-1]] * triple.rotation_steps
        offsets = np.concatenate(([0], np.cumsum(increments)))
        z1 = (cls._fiber_start(seed, TF_FIRST_STREAM, m, fiber_start, 0) + offsets) % m
        z2 = (cls._fiber_start(seed, TF_SECOND_STREAM, m, fiber_start, 1) + offsets) % m
        return (base_states * m + z1) * m + z2

    @classmethod
    def sample_returns(cls, induced: Induced, count: int, seed: int):
        """First `count` visits to the return set and the return time of each."""
        base = induced.base
        inside = CoreService.indicator(induced.return_set, cls.state_count(base))
        mass = cls.state_measure(base)[inside].sum()
        if mass <= 0:
            raise InputValidationError("return set has zero measure")
        length = max(1024, int(math.ceil(2 * (count + 1) / mass)))
        while True:
            states = cls.sample_states(base, length, seed)
            hits = np.flatnonzero(inside[states])
            if hits.size > 1 and np.diff(hits).max() > induced.horizon:
                raise ReturnTimeOverflowError(f"return time exceeds horizon {induced.horizon}")
            if hits.size >= count + 1:
                break
            last = hits[-1] if hits.size else -1
            if length - 1 - last > induced.horizon:
                raise ReturnTimeOverflowError(f"no return within horizon {induced.horizon}")
            length *= 2
        return states[hits[:count]], np.diff(hits[:count + 1])

    @classmethod
    def sample_trajectory(cls, system, partition: Partition = None, length: int = 1000,
                          seed: int = 0, burn_in: int = 0) -> TrajectorySample:
        partition = partition or cls.generator_partition(system)
        if partition.state_count != cls.state_count(system):
            raise DimensionError(
                f"partition covers {partition.state_count} states, system has {cls.state_count(system)}")
        if burn_in < 0:
            raise ParameterError("burn-in must be nonnegative")
        return_times = None
        if isinstance(system, Induced):
            states, return_times = cls.sample_returns(system, length + burn_in, seed)
            return_times = return_times[burn_in:]
        else:
            states = cls.sample_states(system, length + burn_in, seed)
        return TrajectorySample(labels=partition.labels[states[burn_in:]], cell_count=partition.cell_count,
                                seed=seed, burn_in=burn_in, return_times=return_times)

    # exact laws

    @classmethod
    def exact_block_distribution(cls, system, n: int) -> WordDistribution:
        if not isinstance(system, (BernoulliShift, MarkovShift)):
            raise ParameterError("exact block laws are available for Bernoulli and Markov shifts")
        size = cls.state_count(system)
        if size ** n > EXACT_WORD_LIMIT:
            raise ParameterError(f"{size}**{n} words are too many to enumerate")
        words = np.array(list(itertools.product(range(size), repeat=n)), dtype=np.int64).reshape(-1, n)
        if isinstance(system, BernoulliShift):
            weights = np.asarray(system.p)[words].prod(axis=1)
        else:
            transition = np.asarray(system.transition)
            weights = np.asarray(system.stationary)[words[:, 0]]
            weights = weights * transition[words[:, :-1], words[:, 1:]].prod(axis=1)
        return WordDistribution.from_arrays(words, weights / math.fsum(weights))

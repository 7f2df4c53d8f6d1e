import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from errors.ergolab_error import DimensionError, InputValidationError, InsufficientDataError
from models.base_model import PROBABILITY_TOLERANCE
from models.core import FiniteAlgebra, Partition, WordDistribution

# integer block codes are used while alphabet ** width stays below 2 ** CODE_BITS
CODE_BITS = 62


class CoreService:

    @classmethod
    def check_measure(cls, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        if mu.ndim != 1 or mu.size == 0 or np.any(mu < 0):
            raise InputValidationError("measure weights must be a nonnegative vector")
        if abs(math.fsum(mu) - 1.0) > PROBABILITY_TOLERANCE:
            raise InputValidationError("measure weights must sum to 1")
        return mu

    @classmethod
    def indicator(cls, states, size: int) -> np.ndarray:
        mask = np.zeros(size, dtype=bool)
        index = np.fromiter((int(s) for s in states), dtype=np.int64)
        if index.size and (index.min() < 0 or index.max() >= size):
            raise DimensionError(f"state set is not contained in 0..{size - 1}")
        mask[index] = True
        return mask

    @classmethod
    def join(cls, p: Partition, q: Partition) -> Partition:
        if p.state_count != q.state_count:
            raise DimensionError(f"cannot join partitions of {p.state_count} and {q.state_count} states")
        # pair codes sort in lexicographic (P-label, Q-label) order
        return Partition.from_labels(p.labels * q.cell_count + q.labels)

    @classmethod
    def generated_algebra(cls, partition: Partition) -> FiniteAlgebra:
        return FiniteAlgebra(state_count=partition.state_count, atoms=tuple(partition.cells()))

    @classmethod
    def measure_algebra_distance(cls, a, b, mu) -> float:
        mu = cls.check_measure(mu)
        difference = cls.indicator(a, mu.size) ^ cls.indicator(b, mu.size)
        return float(min(1.0, mu[difference].sum()))

    @classmethod
    def distance_to_algebra(cls, e, algebra: FiniteAlgebra, mu) -> float:
        """min over unions B of atoms of mu(E symmetric-difference B).

        Each atom enters B exactly when it carries more mass inside E than outside,
        so the optimum splits atom by atom.
        """
        mu = cls.check_measure(mu)
        if algebra.state_count != mu.size:
            raise DimensionError("algebra and measure live on different state spaces")
        inside = cls.indicator(e, mu.size)
        total = 0.0
        for atom in algebra.atoms:
            index = np.fromiter(atom, dtype=np.int64)
            hit = mu[index][inside[index]].sum()
            miss = mu[index][~inside[index]].sum()
            total += min(hit, miss)
        return float(total)

    @classmethod
    def block_index(cls, sample, width: int, offset: int = 0, count: int = None, alphabet_size: int = None):
        """Identifies the `count` blocks sample[offset + t: offset + t + width].

        Returns (ids, vocabulary): ids[t] indexes the lexicographically sorted
        vocabulary array of distinct blocks.
        """
        sample = np.asarray(sample, dtype=np.int64)
        if width < 1:
            raise InsufficientDataError("block width must be positive")
        if count is None:
            count = sample.size - offset - width + 1
        if count < 1 or offset + count + width - 1 > sample.size:
            raise InsufficientDataError(f"sample of length {sample.size} has no room for {width}-blocks")
        alphabet_size = alphabet_size or int(sample.max()) + 1

        if width * math.log2(max(alphabet_size, 2)) <= CODE_BITS:
            codes = np.zeros(count, dtype=np.int64)
            for j in range(width):
                codes = codes * alphabet_size + sample[offset + j: offset + j + count]
            unique, ids = np.unique(codes, return_inverse=True)
            vocabulary = np.empty((unique.size, width), dtype=np.int64)
            rest = unique.copy()
            for j in range(width - 1, -1, -1):
                vocabulary[:, j] = rest % alphabet_size
                rest //= alphabet_size
            return ids.reshape(-1), vocabulary

        narrow = np.uint8 if alphabet_size <= 2 ** 8 else np.uint16
        segment = sample[offset: offset + count + width - 1].astype(narrow)
        vocabulary, ids = np.unique(sliding_window_view(segment, width), axis=0, return_inverse=True)
        return ids.reshape(-1), vocabulary.astype(np.int64)

    @classmethod
    def empirical_word_distribution(cls, sample, n: int, alphabet_size: int = None) -> WordDistribution:
        sample = np.asarray(sample, dtype=np.int64)
        if sample.size < n:
            raise InsufficientDataError(f"sample of length {sample.size} is shorter than N={n}")
        ids, vocabulary = cls.block_index(sample, n, alphabet_size=alphabet_size)
        counts = np.bincount(ids, minlength=len(vocabulary))
        return WordDistribution.from_arrays(vocabulary, counts / ids.size, counts)

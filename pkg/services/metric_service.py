import logging

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from errors.ergolab_error import ConsistencyError, DimensionError, ParameterError
from models.core import Word, WordDistribution
from models.metric import Coupling, TransportResult
from models.system import FinitePermutation
from services.core_service import CoreService
from settings import get_settings

SOLVER_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
# greedy coupling stops once less than this much mass is left to place
GREEDY_RESIDUAL = 1e-15


def _symbols(word) -> np.ndarray:
    if isinstance(word, Word):
        return np.asarray(word.symbols, dtype=np.int64)
    return np.asarray(word, dtype=np.int64).reshape(-1)


class MetricService:

    @classmethod
    def weak_distance(cls, s: FinitePermutation, t: FinitePermutation, sets, terms: int = None) -> float:
        """Truncated weak-topology distance sum_n 2**-n (mu(S A_n ^ T A_n) + mu(S^-1 A_n ^ T^-1 A_n))."""
        if s.n != t.n:
            raise DimensionError(f"permutations act on {s.n} and {t.n} points")
        sets = list(sets)
        terms = len(sets) if terms is None else terms
        if not sets or not 1 <= terms <= len(sets):
            raise ParameterError(f"need 1 <= terms <= {len(sets)}")
        sigma_s = np.asarray(s.sigma, dtype=np.int64)
        sigma_t = np.asarray(t.sigma, dtype=np.int64)
        total = 0.0
        for index, states in enumerate(sets[:terms], start=1):
            mask = CoreService.indicator(states, s.n)
            image_s = np.zeros(s.n, dtype=bool)
            image_t = np.zeros(s.n, dtype=bool)
            image_s[sigma_s[mask]] = True
            image_t[sigma_t[mask]] = True
            forward = np.count_nonzero(image_s ^ image_t)
            backward = np.count_nonzero(mask[sigma_s] ^ mask[sigma_t])
            total += 2.0 ** -index * (forward + backward) / s.n
        return total

    @classmethod
    def dbar_words(cls, u, v) -> float:
        u, v = _symbols(u), _symbols(v)
        if u.size != v.size:
            raise DimensionError(f"words have lengths {u.size} and {v.size}")
        return float(np.count_nonzero(u != v)) / u.size

    @classmethod
    def lcs_length(cls, u, v) -> int:
        """Longest common subsequence length, one machine-word row update per symbol of v."""
        u, v = _symbols(u).tolist(), _symbols(v).tolist()
        masks = {}
        for i, symbol in enumerate(u):
            masks[symbol] = masks.get(symbol, 0) | (1 << i)
        full = (1 << len(u)) - 1
        row = full
        for symbol in v:
            match = row & masks.get(symbol, 0)
            row = ((row + match) | (row - match)) & full
        return len(u) - row.bit_count()

    @classmethod
    def fbar_words(cls, u, v) -> float:
        u, v = _symbols(u), _symbols(v)
        if u.size != v.size:
            raise DimensionError(f"words have lengths {u.size} and {v.size}")
        return 1.0 - cls.lcs_length(u, v) / u.size

    @classmethod
    def hamming_costs(cls, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a[:, None, :] != b[None, :, :]).mean(axis=2)

    @classmethod
    def lcs_costs(cls, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        n = a.shape[1]
        costs = np.empty((a.shape[0], b.shape[0]))
        rows_b = [row for row in b]
        for i, row in enumerate(a):
            for j, other in enumerate(rows_b):
                costs[i, j] = 1.0 - cls.lcs_length(row, other) / n
        return costs

    @classmethod
    def _exact_coupling(cls, p, q, costs) -> np.ndarray:
        rows, cols = costs.shape
        cells = np.arange(rows * cols)
        constraint_rows = np.concatenate((cells // cols, rows + cells % cols))
        constraints = coo_matrix((np.ones(2 * cells.size), (constraint_rows, np.tile(cells, 2))),
                                 shape=(rows + cols, rows * cols))
        result = linprog(costs.ravel(), A_eq=constraints.tocsr(), b_eq=np.concatenate((p, q)),
                         bounds=(0, None), method="highs-ds", options=SOLVER_OPTIONS)
        if result.status != 0:
            raise ConsistencyError(f"transport solver failed: {result.message}")
        return np.clip(result.x, 0.0, None).reshape(rows, cols)

    @classmethod
    def _greedy_coupling(cls, p, q, costs) -> np.ndarray:
        """Fills cheapest cells first; any feasible plan bounds the optimum from above."""
        left_p, left_q = p.astype(float).copy(), q.astype(float).copy()
        joint = np.zeros(costs.shape)
        remaining = min(left_p.sum(), left_q.sum())
        cols = costs.shape[1]
        for flat in np.argsort(costs, axis=None, kind="stable"):
            i, j = divmod(int(flat), cols)
            amount = min(left_p[i], left_q[j])
            if amount <= 0:
                continue
            joint[i, j] += amount
            left_p[i] -= amount
            left_q[j] -= amount
            remaining -= amount
            if remaining <= GREEDY_RESIDUAL:
                break
        return joint

    @classmethod
    def transport(cls, source_words, target_words, p, q, costs, exact_limit: int = None,
                  lower_bound: float = 0.0) -> TransportResult:
        """Optimal transport between two finite laws under the given cost matrix.

        Problems with at most exact_limit coupling entries are solved exactly by
        linear programming. Larger ones get a greedy coupling as upper bound and
        the larger of the row-minimum, column-minimum and supplied lower bounds.
        """
        exact_limit = get_settings().exact_limit if exact_limit is None else exact_limit
        p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
        sizes = (int(p.size), int(q.size))
        if p.size * q.size <= exact_limit:
            joint = cls._exact_coupling(p, q, costs)
            value = float(np.sum(joint * costs))
            lower = upper = value
            method = "exact"
        else:
            logging.info(f"coupling of {sizes[0]}x{sizes[1]} words exceeds {exact_limit} entries, bounding")
            joint = cls._greedy_coupling(p, q, costs)
            upper = float(np.sum(joint * costs))
            lower = min(upper, max(lower_bound, float(p @ costs.min(axis=1)), float(q @ costs.min(axis=0))))
            value = upper
            method = "bounded"
        coupling = Coupling(source_words=source_words, target_words=target_words,
                            source_weights=p, target_weights=q, joint=joint)
        return TransportResult(value=value, lower_bound=lower, upper_bound=upper, method=method,
                               support_sizes=sizes, coupling=coupling)

    @classmethod
    def _check_lengths(cls, p: WordDistribution, q: WordDistribution):
        if p.length != q.length:
            raise DimensionError(f"distributions live on words of length {p.length} and {q.length}")

    @classmethod
    def dbar_distributions(cls, p: WordDistribution, q: WordDistribution, exact_limit: int = None) -> TransportResult:
        cls._check_lengths(p, q)
        a, b = p.words(), q.words()
        wp, wq = p.probabilities(), q.probabilities()
        alphabet = int(max(a.max(), b.max())) + 1
        # mean over coordinates of the total variation between one-coordinate marginals
        marginal_gap = np.mean([
            0.5 * np.abs(np.bincount(a[:, i], wp, alphabet) - np.bincount(b[:, i], wq, alphabet)).sum()
            for i in range(p.length)
        ])
        return cls.transport(a, b, wp, wq, cls.hamming_costs(a, b), exact_limit, float(marginal_gap))

    @classmethod
    def fbar_distributions(cls, p: WordDistribution, q: WordDistribution, exact_limit: int = None) -> TransportResult:
        cls._check_lengths(p, q)
        a, b = p.words(), q.words()
        wp, wq = p.probabilities(), q.probabilities()
        alphabet = int(max(a.max(), b.max())) + 1
        # symbol counts bound the LCS, and so f-bar, word by word
        counts_a = np.stack([np.bincount(row, minlength=alphabet) for row in a])
        counts_b = np.stack([np.bincount(row, minlength=alphabet) for row in b])
        count_gap = np.abs(wp @ counts_a - wq @ counts_b).sum() / (2 * p.length)
        return cls.transport(a, b, wp, wq, cls.lcs_costs(a, b), exact_limit, float(count_gap))

import itertools
import logging
import math

import numpy as np

from errors.ergolab_error import ConsistencyError, InsufficientDataError, ParameterError
from models.core import Partition
from models.diagnostic import DiagnosticReport
from models.system import FinitePermutation, SkewProduct
from services.core_service import CoreService
from services.entropy_service import EntropyService
from services.metric_service import MetricService
from services.system_service import SystemService
from settings import get_settings

# the two relative-mixing formulas must agree to this tolerance
AGREEMENT_TOLERANCE = 1e-9
# exhaustive clique search is used up to this many words
EXHAUSTIVE_CLIQUE_LIMIT = 15
PAIR_NAMES = ("whole", "fiber_half", "fiber_half_cross", "cylinder_fiber_half")


class DiagnosticService:

    # helpers

    @classmethod
    def _base_windows(cls, extension: SkewProduct, count: int, width: int, seed: int) -> np.ndarray:
        """`count` consecutive non-overlapping base windows cut from one base orbit."""
        return SystemService.sample_states(extension.base, count * width, seed).reshape(count, width)

    @classmethod
    def _factor_average(cls, extension: SkewProduct, f: np.ndarray, g: np.ndarray) -> float:
        """Integral of E(f | base) E(g | base), normalised by the total base mass."""
        m = extension.fiber_grid
        mu = SystemService.state_measure(extension.base)
        conditional = f.reshape(-1, m).mean(axis=1) * g.reshape(-1, m).mean(axis=1)
        return math.fsum(mu * conditional) / math.fsum(mu)

    @classmethod
    def _paired_energy(cls, f_rows: np.ndarray, g_rows: np.ndarray) -> float:
        """Squared Frobenius norm of f_rows @ g_rows.T, via the smaller Gram matrix."""
        if f_rows.shape[0] <= f_rows.shape[1]:
            return float(np.sum((f_rows @ g_rows.T) ** 2))
        return float(np.sum((f_rows.T @ f_rows) * (g_rows.T @ g_rows)))

    @classmethod
    def pair_family(cls, extension: SkewProduct, names=("fiber_half",)) -> list:
        m = extension.fiber_grid
        states = np.arange(SystemService.state_count(extension), dtype=np.int64)
        lower = states % m < max(m // 2, 1)
        cylinder = SystemService.generator_partition(extension.base).labels[states // m] == 0
        sets = {
            "whole": (states, states),
            "fiber_half": (states[lower], states[lower]),
            "fiber_half_cross": (states[lower], states[~lower]),
            "cylinder_fiber_half": (states[lower & cylinder], states[lower & cylinder]),
        }
        unknown = [name for name in names if name not in sets]
        if unknown:
            raise ParameterError(f"unknown pairs {unknown}, expected some of {PAIR_NAMES}")
        return [tuple(frozenset(s.tolist()) for s in sets[name]) for name in names]

    @classmethod
    def centered_fiber_half(cls, extension: SkewProduct) -> np.ndarray:
        """1/2 on the lower half of each fiber, -1/2 on the upper half."""
        m = extension.fiber_grid
        u = np.arange(SystemService.state_count(extension)) % m
        return np.where(u < max(m // 2, 1), 0.5, -0.5)

    # relatively weak mixing

    @classmethod
    def ea_statistic(cls, extension: SkewProduct, c, d, length: int, past: int = None,
                     windows: int = 256, seed: int = 0) -> DiagnosticReport:
        """Averaged conditional correlation of the orbits of C and D over `length` steps.

        Conditioning is on the exact base factor when `past` is None, otherwise on
        the cylinder of base symbols from -past to past, estimated from the windows
        that share it.
        """
        if length < 1 or windows < 1 or (past is not None and past < 0):
            raise ParameterError("need length >= 1, windows >= 1 and past >= 0")
        m = extension.fiber_grid
        size = SystemService.state_count(extension)
        f = CoreService.indicator(c, size).astype(float)
        g = CoreService.indicator(d, size).astype(float)
        average = cls._factor_average(extension, f, g)

        radius = past or 0
        span = radius + max(length, radius + 1)
        base = cls._base_windows(extension, windows, span, seed)
        orbit = base[:, radius: radius + length]
        states = orbit[:, None, :] * m + SystemService.fiber_orbits(extension, orbit)
        f_orbits, g_orbits = f[states], g[states]

        flags = ()
        if past is None:
            gram = np.einsum("wul,wvl->wuv", f_orbits, g_orbits)
            energy = np.sum(gram ** 2, axis=(1, 2)) / (m * length) ** 2
            correlation = float(energy.mean())
            cell_count = windows
        else:
            labels = SystemService.generator_partition(extension.base).labels[base[:, :2 * radius + 1]]
            _, cells = np.unique(labels, axis=0, return_inverse=True)
            cells = cells.reshape(-1)
            total = 0.0
            for cell in range(int(cells.max()) + 1):
                members = np.flatnonzero(cells == cell)
                rows = members.size * m
                energy = cls._paired_energy(f_orbits[members].reshape(rows, length),
                                            g_orbits[members].reshape(rows, length))
                total += members.size * energy / (rows * length) ** 2
            correlation = total / windows
            cell_count = int(cells.max()) + 1
            if cell_count > windows / 10:
                flags = ("undersampled",)
        value = correlation - average ** 2
        return DiagnosticReport(
            statistic="ea",
            values={"value": value, "product_term": average ** 2, "conditioning_cells": cell_count},
            parameters={"length": length, "past": past, "windows": windows, "fiber_grid": m},
            seed=seed,
            flags=flags,
        )

    @classmethod
    def factor_rwm_statistic(cls, extension: SkewProduct, f_i, f_j, n: int, windows: int = 256,
                             seed: int = 0, projection: str = "factor") -> DiagnosticReport:
        """Mean square deviation of N-step averages of h from its integral.

        h is E(f_i | base) E(f_j | base) under the factor projection and f_i f_j
        under the identity projection.
        """
        if n < 1 or windows < 1:
            raise ParameterError("need N >= 1 and windows >= 1")
        if projection not in ("factor", "identity"):
            raise ParameterError(f"unknown projection {projection!r}")
        m = extension.fiber_grid
        fi, fj = SystemService.tabulate(extension, f_i), SystemService.tabulate(extension, f_j)
        base = cls._base_windows(extension, windows, n, seed)
        if projection == "factor":
            h = fi.reshape(-1, m).mean(axis=1) * fj.reshape(-1, m).mean(axis=1)
            mu = SystemService.state_measure(extension.base)
            orbit_values = h[base]
        else:
            h = fi * fj
            mu = SystemService.state_measure(extension)
            # each window starts from its own fiber point, so the windows sample the invariant measure
            starts = np.random.default_rng([seed, n]).integers(m, size=windows)
            positions = SystemService.fiber_orbits(extension, base)[np.arange(windows), starts]
            orbit_values = h[base * m + positions]
        integral = math.fsum(mu * h) / math.fsum(mu)
        value = float(np.mean((orbit_values.mean(axis=1) - integral) ** 2))
        return DiagnosticReport(
            statistic="factor_rwm",
            values={"value": value, "integral": integral},
            parameters={"N": n, "windows": windows, "projection": projection},
            seed=seed,
        )

    @classmethod
    def rwm_verdict(cls, extension: SkewProduct, pairs, schedule, past: int = None, tol: float = 0.05,
                    windows: int = 256, seed: int = 0) -> DiagnosticReport:
        """Passes when every pair drops below tol at some length of the schedule."""
        pairs, schedule = list(pairs), list(schedule)
        if not pairs or not schedule:
            raise ParameterError("need at least one pair and one length")
        trace, finals = [], []
        passed = 0
        for index, (c, d) in enumerate(pairs):
            values = []
            for length in schedule:
                value = cls.ea_statistic(extension, c, d, length, past, windows, seed).value
                values.append(value)
                trace.append({"pair": index, "length": length, "ea": value})
            finals.append(values[-1])
            if min(values) < tol:
                passed += 1
            else:
                logging.info(f"pair {index} stays above {tol} along the schedule")
        return DiagnosticReport(
            statistic="rwm",
            values={"value": max(finals), "pairs_passed": passed},
            parameters={"schedule": schedule, "past": past, "tol": tol, "windows": windows},
            seed=seed,
            verdict=bool(passed == len(pairs)),
            trace=tuple(trace),
        )

    # conditional laws of the future given the past

    @classmethod
    def _conditional_distances(cls, sample, n: int, k: int, eps: float, metric: str, floor: int,
                               exact_limit: int = None) -> DiagnosticReport:
        sample = np.asarray(sample, dtype=np.int64)
        if n < 1 or k < 1:
            raise ParameterError("need N >= 1 and k >= 1")
        windows = sample.size - (k + n) + 1
        if windows < 1:
            raise InsufficientDataError(f"sample of length {sample.size} has no room for k + N = {k + n}")
        alphabet_size = int(sample.max()) + 1
        past_ids, past_words = CoreService.block_index(sample, k, 0, windows, alphabet_size)
        future_ids, vocabulary = CoreService.block_index(sample, n, k, windows, alphabet_size)
        unconditional = np.bincount(future_ids, minlength=len(vocabulary)) / windows
        costs = (MetricService.hamming_costs if metric == "dbar" else MetricService.lcs_costs)(vocabulary, vocabulary)

        size = len(vocabulary)
        joint, joint_counts = np.unique(past_ids * size + future_ids, return_counts=True)
        past_counts = np.bincount(past_ids)
        good_mass = unresolved = worst = 0.0
        methods = set()
        trace = []
        for past in range(past_counts.size):
            mass = past_counts[past] / windows
            if past_counts[past] < floor:
                unresolved += mass
                continue
            selected = joint // size == past
            support = joint[selected] % size
            result = MetricService.transport(vocabulary, vocabulary[support], unconditional,
                                             joint_counts[selected] / past_counts[past], costs[:, support],
                                             exact_limit)
            methods.add(result.method)
            worst = max(worst, result.value)
            if result.value < eps:
                good_mass += mass
            trace.append({"past": " ".join(map(str, past_words[past].tolist())), "mass": float(mass),
                          "distance": result.value, "method": result.method})
        flags = ()
        if unresolved > 0:
            logging.warning(f"{unresolved:.4g} of the past mass falls below {floor} occurrences")
            flags += ("undersampled",)
        if "bounded" in methods:
            flags += ("bounded",)
        return DiagnosticReport(
            statistic="vwb" if metric == "dbar" else "vlb",
            values={"value": worst, "good_mass": good_mass, "unresolved_mass": unresolved},
            parameters={"N": n, "k": k, "eps": eps, "floor": floor},
            verdict=bool(good_mass > 1 - eps),
            flags=flags,
            trace=tuple(trace),
        )

    @classmethod
    def vwb_statistic(cls, sample, n: int, k: int, eps: float, floor: int = None,
                      exact_limit: int = None) -> DiagnosticReport:
        """d-bar distance between the N-block law given each k-past and the unconditional law."""
        floor = get_settings().occupancy_floor if floor is None else floor
        return cls._conditional_distances(sample, n, k, eps, "dbar", floor, exact_limit)

    @classmethod
    def vlb_statistic(cls, sample, n: int, k: int, eps: float, floor: int = None,
                      exact_limit: int = None) -> DiagnosticReport:
        """f-bar version of vwb_statistic."""
        floor = get_settings().occupancy_floor if floor is None else floor
        return cls._conditional_distances(sample, n, k, eps, "fbar", floor, exact_limit)

    @classmethod
    def _separated(cls, vocabulary, members, candidate, eps) -> bool:
        return all(MetricService.fbar_words(vocabulary[candidate], vocabulary[m]) < eps for m in members)

    @classmethod
    def greedy_clique(cls, vocabulary: np.ndarray, masses: np.ndarray, eps: float) -> list:
        """Words taken in decreasing mass, kept when within eps f-bar of every kept word."""
        members = []
        for index in np.argsort(-masses, kind="stable"):
            if cls._separated(vocabulary, members, index, eps):
                members.append(int(index))
        return sorted(members)

    @classmethod
    def max_mass_clique(cls, vocabulary: np.ndarray, masses: np.ndarray, eps: float) -> list:
        """Heaviest set of words pairwise within eps in f-bar, by exhaustive search."""
        size = len(vocabulary)
        if size > EXHAUSTIVE_CLIQUE_LIMIT:
            raise ParameterError(f"exhaustive search is limited to {EXHAUSTIVE_CLIQUE_LIMIT} words")
        close = [[MetricService.fbar_words(vocabulary[i], vocabulary[j]) < eps for j in range(size)]
                 for i in range(size)]
        best, best_mass = [], -1.0
        for subset in range(1, 2 ** size):
            members = [i for i in range(size) if subset >> i & 1]
            if all(close[i][j] for i, j in itertools.combinations(members, 2)):
                mass = float(masses[members].sum())
                if mass > best_mass:
                    best, best_mass = members, mass
        return best

    @classmethod
    def vlb_zero_entropy(cls, sample, n: int, eps: float, method: str = "auto",
                         floor: int = None) -> DiagnosticReport:
        """Mass of a set of N-words pairwise within eps in f-bar; passes above 1 - eps."""
        floor = get_settings().occupancy_floor if floor is None else floor
        ids, vocabulary = CoreService.block_index(sample, n)
        counts = np.bincount(ids, minlength=len(vocabulary))
        masses = counts / ids.size
        if method == "auto":
            method = "exhaustive" if len(vocabulary) <= EXHAUSTIVE_CLIQUE_LIMIT else "greedy"
        if method == "exhaustive":
            members = cls.max_mass_clique(vocabulary, masses, eps)
        elif method == "greedy":
            members = cls.greedy_clique(vocabulary, masses, eps)
        else:
            raise ParameterError(f"unknown clique method {method!r}")
        mass = float(masses[members].sum())
        flags = ("undersampled",) if counts[members].min() < floor else ()
        return DiagnosticReport(
            statistic="vlb_zero_entropy",
            values={"value": mass, "clique_size": len(members), "support_size": len(vocabulary)},
            parameters={"N": n, "eps": eps, "method": method},
            verdict=bool(mass > 1 - eps),
            flags=flags,
            trace=tuple({"word": " ".join(map(str, vocabulary[i].tolist())), "mass": float(masses[i])}
                        for i in members),
        )

    # finitary K-property

    @classmethod
    def k_property_check(cls, sample, n: int, k0: int, k1: int, eps: float = 0.1, delta: float = 0.1,
                         entropy_rate: float = None) -> DiagnosticReport:
        """Finite-horizon check of the two entropy conditions of the K-property.

        1. H(N + k0 | k1-past) stays below (N + k0) h + delta.
        2. H(N | past at lags k0..k1) stays above H_N - eps.
        """
        if not k1 > k0 >= 1 or n < 1:
            raise ParameterError("need N >= 1 and k1 > k0 >= 1")
        if entropy_rate is None:
            entropy_rate = EntropyService.conditional_block_entropy(sample, 1, k1).value
        first = EntropyService.conditional_block_entropy(sample, n + k0, k1)
        remote = EntropyService.conditional_block_entropy(sample, n, k1 - k0 + 1, gap=k0 - 1)
        unconditional = EntropyService.conditional_block_entropy(sample, n)
        bound = (n + k0) * entropy_rate + delta
        floor = unconditional.value - eps
        condition_one, condition_two = first.value < bound, remote.value > floor
        return DiagnosticReport(
            statistic="kcheck",
            values={"value": remote.value - unconditional.value, "near_entropy": first.value,
                    "near_bound": bound, "remote_entropy": remote.value, "block_entropy": unconditional.value,
                    "entropy_rate": entropy_rate, "condition_one": float(condition_one),
                    "condition_two": float(condition_two)},
            parameters={"N": n, "k0": k0, "k1": k1, "eps": eps, "delta": delta},
            verdict=bool(condition_one and condition_two),
            flags=tuple(sorted(set(first.flags + remote.flags + unconditional.flags))),
        )

    @classmethod
    def bernoulli_open_condition(cls, sample, n1: int, n2: int, eps: float, delta: float,
                                 entropy_rate: float = None, floor: int = None) -> DiagnosticReport:
        """H(N1 | N2-past) below N1 h + delta together with a passing vwb check at (N1, N2, eps)."""
        if entropy_rate is None:
            entropy_rate = EntropyService.conditional_block_entropy(sample, 1, n2).value
        conditional = EntropyService.conditional_block_entropy(sample, n1, n2)
        bound = n1 * entropy_rate + delta
        weak_bernoulli = cls.vwb_statistic(sample, n1, n2, eps, floor)
        return DiagnosticReport(
            statistic="bernoulli_open",
            values={"value": conditional.value, "bound": bound, "vwb": weak_bernoulli.value},
            parameters={"N1": n1, "N2": n2, "eps": eps, "delta": delta},
            verdict=bool(conditional.value < bound and weak_bernoulli.verdict),
            flags=tuple(sorted(set(conditional.flags + weak_bernoulli.flags))),
        )

    @classmethod
    def generator_gap_check(cls, permutation: FinitePermutation, alpha: Partition, event, window: int,
                            threshold: float = 0.01) -> DiagnosticReport:
        """Distance from `event` to the algebra of the join of T**j alpha, |j| <= window."""
        algebra = CoreService.generated_algebra(SystemService.dynamical_join(permutation, alpha, window))
        uniform = np.full(permutation.n, 1.0 / permutation.n)
        distance = CoreService.distance_to_algebra(event, algebra, uniform)
        return DiagnosticReport(
            statistic="generator_gap",
            values={"value": distance, "atoms": len(algebra.atoms)},
            parameters={"window": window, "threshold": threshold},
            verdict=bool(distance > threshold),
        )

    # relative mixing

    @classmethod
    def relative_mixing_statistic(cls, extension: SkewProduct, f, g, n: int, windows: int = 2000,
                                  seed: int = 0) -> DiagnosticReport:
        """L2 norm over the base of E(T**n f * g | base) - E(T**n f | base) E(g | base).

        Evaluated twice, directly and with g replaced by g - E(g | base); a
        disagreement beyond 1e-9 raises.
        """
        if n < 0 or windows < 1:
            raise ParameterError("need n >= 0 and windows >= 1")
        m = extension.fiber_grid
        fv, gv = SystemService.tabulate(extension, f), SystemService.tabulate(extension, g)
        base = cls._base_windows(extension, windows, n + 1, seed)
        positions = SystemService.fiber_orbits(extension, base)
        shifted = fv[base[:, n:n + 1] * m + positions[:, :, n]]
        start = gv[base[:, :1] * m + np.arange(m)]
        g_mean = start.mean(axis=1)
        direct = (shifted * start).mean(axis=1) - shifted.mean(axis=1) * g_mean
        centered = (shifted * (start - g_mean[:, None])).mean(axis=1)
        value = math.sqrt(float(np.mean(direct ** 2)))
        check = math.sqrt(float(np.mean(centered ** 2)))
        if abs(value - check) > AGREEMENT_TOLERANCE:
            raise ConsistencyError(f"relative mixing formulas disagree: {value!r} and {check!r}")
        return DiagnosticReport(
            statistic="relmix",
            values={"value": value, "centered": check},
            parameters={"lag": n, "windows": windows},
            seed=seed,
        )

    @classmethod
    def relative_product_correlation(cls, extension: SkewProduct, f, g, n: int, trajectories: int = 2000,
                                     seed: int = 0) -> DiagnosticReport:
        """Integral of (T**n F) G over the relative independent product.

        F is f(x, u) f(x, v) - E(f | base)(x)**2 and G is built from g in the same
        way. Each trajectory is an independent stationary orbit of the product.
        """
        product = SystemService.relative_independent_product(extension)
        m = extension.fiber_grid
        fv, gv = SystemService.tabulate(extension, f), SystemService.tabulate(extension, g)
        f_factor = fv.reshape(-1, m).mean(axis=1)
        g_factor = gv.reshape(-1, m).mean(axis=1)
        seeds = np.random.SeedSequence(seed).generate_state(trajectories)
        total = 0.0
        for child in seeds.tolist():
            states = SystemService.sample_states(product, n + 1, child)
            x0, u0, v0 = states[0] // (m * m), states[0] // m % m, states[0] % m
            xn, un, vn = states[n] // (m * m), states[n] // m % m, states[n] % m
            shifted = fv[xn * m + un] * fv[xn * m + vn] - f_factor[xn] ** 2
            start = gv[x0 * m + u0] * gv[x0 * m + v0] - g_factor[x0] ** 2
            total += shifted * start
        return DiagnosticReport(
            statistic="relative_product_correlation",
            values={"value": total / trajectories},
            parameters={"lag": n, "trajectories": trajectories},
            seed=seed,
        )

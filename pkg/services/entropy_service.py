import logging
import math

import numpy as np
from scipy.stats import entropy as shannon_entropy

from errors.ergolab_error import InputValidationError, InsufficientDataError, ParameterError
from models.base_model import MARGINAL_TOLERANCE
from models.core import WordDistribution
from models.entropy import EntropyEstimate, EpsIndependence
from models.system import BernoulliShift, FinitePermutation, MarkovShift, RotationCoding
from services.core_service import CoreService

# block counts are trusted while alphabet ** (N + k) stays below sample / UNDERSAMPLING_RATIO
UNDERSAMPLING_RATIO = 50


def _plugin(counts: np.ndarray):
    """Plug-in entropy, its delta-method standard error and the occupied cell count."""
    counts = counts[counts > 0]
    total = counts.sum()
    p = counts / total
    value = float(shannon_entropy(p))
    spread = float(np.sum(p * np.log(p) ** 2)) - value ** 2
    return value, math.sqrt(max(spread, 0.0) / total), int(counts.size)


class EntropyService:

    @classmethod
    def block_entropy(cls, distribution: WordDistribution) -> float:
        return float(shannon_entropy(distribution.probabilities()))

    @classmethod
    def conditional_entropy_from_joint(cls, distribution: WordDistribution, past: int) -> float:
        """H(last N symbols | first `past` symbols) of an exact (past + N)-block law."""
        if not 0 <= past < distribution.length:
            raise ParameterError(f"past length must lie in 0..{distribution.length - 1}")
        joint = cls.block_entropy(distribution)
        if past == 0:
            return joint
        _, inverse = np.unique(distribution.words()[:, :past], axis=0, return_inverse=True)
        marginal = np.bincount(inverse.reshape(-1), weights=distribution.probabilities())
        return max(joint - float(shannon_entropy(marginal)), 0.0)

    @classmethod
    def conditional_block_entropy(cls, sample, n: int, k: int = 0, gap: int = 0,
                                  alphabet_size: int = None) -> EntropyEstimate:
        """Plug-in H(N-block | k-block past ending `gap` symbols before it)."""
        if n < 1 or k < 0 or gap < 0:
            raise ParameterError("need N >= 1, k >= 0 and gap >= 0")
        sample = np.asarray(sample, dtype=np.int64)
        windows = sample.size - (k + gap + n) + 1
        if windows < 1:
            raise InsufficientDataError(f"sample of length {sample.size} has no room for k + gap + N = {k + gap + n}")
        alphabet_size = alphabet_size or int(sample.max()) + 1
        future, _ = CoreService.block_index(sample, n, k + gap, windows, alphabet_size)
        value, standard_error, occupied = _plugin(np.bincount(future))
        if k > 0:
            past, _ = CoreService.block_index(sample, k, 0, windows, alphabet_size)
            _, joint_counts = np.unique(past * (int(future.max()) + 1) + future, return_counts=True)
            joint, standard_error, joint_occupied = _plugin(joint_counts)
            past_value, _, past_occupied = _plugin(np.bincount(past))
            value = max(joint - past_value, 0.0)
            occupied = joint_occupied - past_occupied + 1
        flags = ()
        if alphabet_size ** (n + k) > sample.size / UNDERSAMPLING_RATIO:
            flags = ("undersampled",)
        return EntropyEstimate(
            value=value,
            block_length=n,
            past_length=k,
            gap=gap,
            sample_length=int(sample.size),
            standard_error=standard_error,
            bias_corrected=value + (occupied - 1) / (2 * windows),
            flags=flags,
        )

    @classmethod
    def entropy_rate_estimate(cls, sample, n: int, past: int = None) -> EntropyEstimate:
        """Per-symbol entropy: H_N / N, or H(N | past) / N when a past length is given."""
        estimate = cls.conditional_block_entropy(sample, n, past or 0)
        flags = estimate.flags
        if past is None and n > 1:
            shorter = cls.conditional_block_entropy(sample, n - 1).value / (n - 1)
            if estimate.value / n > shorter + estimate.standard_error:
                logging.warning(f"H_N/N increased between N={n - 1} and N={n}")
                flags = flags + ("non_monotone",)
        return estimate.model_copy(update={
            "value": estimate.value / n,
            "standard_error": estimate.standard_error / n,
            "bias_corrected": estimate.bias_corrected / n,
            "flags": flags,
        })

    @classmethod
    def analytic_entropy(cls, system):
        """Closed-form entropy rate in nats, or None when no closed form is known."""
        match system:
            case BernoulliShift():
                return float(shannon_entropy(system.p))
            case MarkovShift():
                rows = [shannon_entropy(row) for row in system.transition]
                return float(np.dot(system.stationary, rows))
            case RotationCoding() | FinitePermutation():
                return 0.0
        return None

    @classmethod
    def _check_joint(cls, joint) -> np.ndarray:
        joint = np.asarray(joint, dtype=float)
        if joint.ndim < 2 or np.any(joint < 0) or abs(math.fsum(joint.ravel()) - 1.0) > MARGINAL_TOLERANCE:
            raise InputValidationError("joint law must be a nonnegative array summing to 1")
        return joint

    @classmethod
    def eps_independence(cls, joint, eps: float) -> EpsIndependence:
        """Tests P eps-independent of Q from joint[i, j] = mu(P_i and Q_j).

        Q-columns whose conditional law of P is within eps of the P-marginal in
        summed absolute difference are good; the verdict asks for good mass above 1 - eps.
        """
        joint = cls._check_joint(joint)
        if joint.ndim != 2:
            raise InputValidationError("eps-independence takes a two-dimensional joint law")
        if eps <= 0:
            raise ParameterError("eps must be positive")
        row_mass = joint.sum(axis=1)
        column_mass = joint.sum(axis=0)
        null_columns = tuple(int(j) for j in np.flatnonzero(column_mass <= 0))
        if null_columns:
            logging.info(f"columns {null_columns} carry no mass and are skipped")
        live = np.flatnonzero(column_mass > 0)
        spread = np.abs(joint[:, live] / column_mass[live] - row_mass[:, None]).sum(axis=0)
        good = live[spread < eps]
        good_mass = float(column_mass[good].sum())
        return EpsIndependence(
            verdict=bool(good_mass > 1 - eps),
            witness=tuple(int(j) for j in good),
            good_mass=good_mass,
            mass_slack=good_mass - (1 - eps),
            column_slack=float(eps - spread[spread < eps].max()) if good.size else None,
            null_columns=null_columns,
        )

    @classmethod
    def conditional_eps_independence(cls, joint, eps: float) -> EpsIndependence:
        """P eps-independent of Q given R, from joint[i, r, j] = mu(P_i and R_r and Q_j)."""
        joint = cls._check_joint(joint)
        if joint.ndim != 3:
            raise InputValidationError("conditional eps-independence takes a three-dimensional joint law")
        atom_mass = joint.sum(axis=(0, 2))
        good = [r for r in np.flatnonzero(atom_mass > 0)
                if cls.eps_independence(joint[:, r, :] / atom_mass[r], eps).verdict]
        good_mass = float(atom_mass[good].sum())
        return EpsIndependence(
            verdict=bool(good_mass > 1 - eps),
            witness=tuple(int(r) for r in good),
            good_mass=good_mass,
            mass_slack=good_mass - (1 - eps),
            column_slack=None,
            null_columns=tuple(int(r) for r in np.flatnonzero(atom_mass <= 0)),
        )

    @classmethod
    def mutual_information(cls, joint) -> float:
        joint = cls._check_joint(joint)
        marginal = float(shannon_entropy(joint.sum(axis=1)))
        conditional = float(shannon_entropy(joint.ravel())) - float(shannon_entropy(joint.sum(axis=0)))
        return marginal - conditional

    @classmethod
    def independence_delta(cls, eps: float) -> float:
        """Mutual information below which eps-independence is guaranteed (Pinsker)."""
        if eps <= 0:
            raise ParameterError("eps must be positive")
        return eps ** 3 / 2

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import binomtest

from errors.ergolab_error import ParameterError, PreconditionRefusedError
from models.diagnostic import DiagnosticReport
from models.experiment import (
    ExperimentConfig,
    ExperimentResult,
    EntropyParams,
    KcheckParams,
    RelmixParams,
    RwmParams,
    TrialRecord,
    VlbParams,
    VwbParams,
)
from models.core import Partition
from models.system import BernoulliShift, ConstantCocycle, RandomCocycle
from services.diagnostic_service import DiagnosticService
from services.entropy_service import EntropyService
from services.system_service import SystemService
from settings import VERSION, get_settings

CLASS_PARAMS = {"vwb": VwbParams, "vlb": VlbParams, "kcheck": KcheckParams, "relmix": RelmixParams}


def trial_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1, dtype=np.uint64)[0])


class ExperimentService:

    @classmethod
    def apply_overrides(cls, config: ExperimentConfig) -> ExperimentConfig:
        settings = get_settings()
        update = {}
        if settings.seed is not None:
            update["master_seed"] = settings.seed
        if settings.workers > 1:
            update["workers"] = settings.workers
        return config.model_copy(update=update) if update else config

    @classmethod
    def extension(cls, config: ExperimentConfig, seed: int):
        family = config.cocycles
        if family.kind == "frozen":
            cocycle = ConstantCocycle()
        else:
            cocycle = RandomCocycle(seed=seed, partition=family.partition,
                                    family="rotation" if family.kind == "random_rotation" else "permutation")
        return SystemService.skew_product(config.base, cocycle, family.fiber_grid)

    @classmethod
    def _run_trials(cls, config: ExperimentConfig, trial) -> ExperimentResult:
        indices = range(config.cocycles.count)
        task = functools.partial(trial, config)
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                records = list(pool.map(task, indices))
        else:
            records = [task(index) for index in indices]
        passed = sum(record.passed for record in records)
        interval = binomtest(passed, len(records)).proportion_ci(method="wilson")
        logging.info(f"{config.name}: {passed} of {len(records)} trials passed")
        return ExperimentResult(
            experiment=config.name,
            trials=tuple(records),
            pass_rate=passed / len(records),
            confidence_interval=(float(interval.low), float(interval.high)),
            config=config,
            version=VERSION,
        )

    @classmethod
    def _record(cls, index, seed, extension, report: DiagnosticReport, passed: bool) -> TrialRecord:
        return TrialRecord(trial=index, seed=seed, cocycle=extension.cocycle.to_dict(), reports=(report,),
                           passed=bool(passed))

    # entropy genericity

    @classmethod
    def base_entropy(cls, config: ExperimentConfig) -> float:
        value = EntropyService.analytic_entropy(config.base)
        if value is not None:
            return value
        params = EntropyParams(**config.diagnostic.get("entropy", {}))
        labels = SystemService.sample_trajectory(config.base, None, config.sample_length, config.master_seed).labels
        logging.info("base entropy has no closed form, estimating it from a base orbit")
        return EntropyService.entropy_rate_estimate(labels, params.n, params.past if params.past else 1).value

    @classmethod
    def _entropy_trial(cls, config: ExperimentConfig, index: int, base_value: float) -> TrialRecord:
        params = EntropyParams(**config.diagnostic.get("entropy", {}))
        seed = trial_seed(config.master_seed, index)
        extension = cls.extension(config, seed)
        level = params.dyadic_level
        if level is None:
            level = int(math.log2(extension.fiber_grid))
        partition = SystemService.dyadic_partition(extension, level)
        labels = SystemService.sample_trajectory(extension, partition, config.sample_length, seed).labels
        estimate = EntropyService.entropy_rate_estimate(labels, params.n, params.past)
        report = DiagnosticReport(
            statistic="entropy_rate",
            values={"value": estimate.value, "base_entropy": base_value,
                    "standard_error": estimate.standard_error},
            parameters={"N": params.n, "past": params.past, "margin": params.margin, "dyadic_level": level},
            seed=seed,
            verdict=bool(estimate.value <= base_value + params.margin),
            flags=estimate.flags,
        )
        return cls._record(index, seed, extension, report, report.verdict)

    @classmethod
    def run_entropy_genericity(cls, config: ExperimentConfig) -> ExperimentResult:
        """Share of random extensions whose entropy stays within a margin of the base entropy."""
        return cls._run_trials(config, functools.partial(cls._entropy_trial, base_value=cls.base_entropy(config)))

    # relative weak mixing genericity

    @classmethod
    def _rwm_trial(cls, config: ExperimentConfig, index: int) -> TrialRecord:
        params = RwmParams(**config.diagnostic.get("rwm", {}))
        seed = trial_seed(config.master_seed, index)
        extension = cls.extension(config, seed)
        pairs = DiagnosticService.pair_family(extension, params.pairs)
        report = DiagnosticService.rwm_verdict(extension, pairs, params.schedule, params.past, params.tol,
                                               params.windows, seed)
        return cls._record(index, seed, extension, report, report.verdict)

    @classmethod
    def run_rwm_genericity(cls, config: ExperimentConfig) -> ExperimentResult:
        return cls._run_trials(config, cls._rwm_trial)

    # class preservation

    @classmethod
    def _class_check(cls, name: str, labels, params) -> DiagnosticReport:
        if name == "vwb":
            return DiagnosticService.vwb_statistic(labels, params.n, params.k, params.eps, params.floor)
        if name == "vlb":
            if params.zero_entropy:
                return DiagnosticService.vlb_zero_entropy(labels, params.n, params.eps, floor=params.floor)
            return DiagnosticService.vlb_statistic(labels, params.n, params.k, params.eps, params.floor)
        return DiagnosticService.k_property_check(labels, params.n, params.k0, params.k1, params.eps,
                                                  params.delta, params.entropy_rate)

    @classmethod
    def _preservation_trial(cls, config: ExperimentConfig, index: int, name: str) -> TrialRecord:
        params = CLASS_PARAMS[name](**config.diagnostic.get(name, {}))
        seed = trial_seed(config.master_seed, index)
        extension = cls.extension(config, seed)
        if name == "relmix":
            observable = DiagnosticService.centered_fiber_half(extension)
            report = DiagnosticService.relative_mixing_statistic(extension, observable, observable, params.lag,
                                                                 params.windows, seed)
            report = report.model_copy(update={"verdict": bool(report.value < params.tol)})
        else:
            base_partition = None
            if not params.observe_base:
                base_partition = Partition.trivial(SystemService.state_count(extension.base))
            partition = SystemService.dyadic_partition(extension, params.dyadic_level, base_partition)
            labels = SystemService.sample_trajectory(extension, partition, config.sample_length, seed).labels
            report = cls._class_check(name, labels, params)
            report = report.model_copy(update={"seed": seed})
        return cls._record(index, seed, extension, report, report.verdict)

    @classmethod
    def _check_base(cls, config: ExperimentConfig, name: str) -> None:
        if isinstance(config.base, BernoulliShift):
            logging.info(f"{config.name}: Bernoulli base, skipping the {name} base check")
            return
        params = CLASS_PARAMS[name](**config.diagnostic.get(name, {}))
        base_labels = SystemService.sample_trajectory(config.base, None, config.sample_length,
                                                      config.master_seed).labels
        if name == "relmix":
            base_report = cls._class_check("kcheck", base_labels, params.base_check)
        else:
            base_report = cls._class_check(name, base_labels, params)
        if not base_report.verdict:
            raise PreconditionRefusedError(f"base system fails the {base_report.statistic} check")

    @classmethod
    def run_class_preservation(cls, config: ExperimentConfig, name: str) -> ExperimentResult:
        """Share of random extensions that keep the base's class under the named diagnostic.

        Refuses to run unless the base itself passes; relative mixing asks for the
        K-property check on the base. Bernoulli bases belong to every class and are not sampled.
        Unless observe_base is set the trials watch the fiber arcs with the base symbols hidden.
        """
        if name not in CLASS_PARAMS:
            raise ParameterError(f"unknown class {name!r}, expected one of {sorted(CLASS_PARAMS)}")
        cls._check_base(config, name)
        return cls._run_trials(config, functools.partial(cls._preservation_trial, name=name))

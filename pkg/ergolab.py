import argparse
import csv
import json
import logging
import sys

from errors.ergolab_error import ErgolabError, ParameterError
from models.core import WordDistribution
from services.diagnostic_service import DiagnosticService
from services.entropy_service import EntropyService
from services.experiment_service import CLASS_PARAMS, ExperimentService
from services.file_service import FileService
from services.metric_service import MetricService
from services.system_service import SystemService
from settings import VERSION, get_settings

RUNS = ("entropy", "rwm") + tuple(CLASS_PARAMS)


def parse_partition(system, choice: str):
    if choice == "gen":
        return SystemService.generator_partition(system)
    if choice.startswith("dyadic:"):
        return SystemService.dyadic_partition(system, int(choice.split(":", 1)[1]))
    raise ParameterError(f"unknown partition {choice!r}, expected gen or dyadic:<n>")


def system_sample(args):
    """Labels of the trajectory file or of a fresh orbit of the system file."""
    if args.sample:
        return FileService.read_trajectory(args.sample).labels
    if not args.system:
        raise ParameterError("either --system or --sample is required")
    system = FileService.load_system(args.system)
    partition = parse_partition(system, args.partition)
    sample = SystemService.sample_trajectory(system, partition, args.steps, args.seed, args.burn_in)
    if args.dump:
        FileService.dump_trajectory(sample, args.dump)
    return sample.labels


def load_extension(args):
    extension = FileService.load_system(args.system)
    if extension.kind != "skew_product":
        raise ParameterError("this diagnostic runs on a skew product system")
    return SystemService.skew_product(extension.base, extension.cocycle, extension.fiber_grid)


def emit(payload: dict, trace=(), as_csv=False):
    if as_csv:
        rows = list(trace)
        writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]) if rows else ["value"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows or [{"value": payload.get("values", payload).get("value")}])
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))


def distance_command(args):
    if args.words:
        first, second = (FileService.read_words(path) for path in args.words)
        if len(first) == 1 and len(second) == 1:
            word_metric = MetricService.dbar_words if args.command == "dbar" else MetricService.fbar_words
            value = word_metric(first[0], second[0])
            emit({"value": value, "method": "exact", "support_sizes": [1, 1]})
            return
        first = WordDistribution.uniform([w.symbols for w in first])
        second = WordDistribution.uniform([w.symbols for w in second])
    elif args.dist:
        first, second = (FileService.read_distribution(path) for path in args.dist)
    else:
        raise ParameterError("either --words or --dist is required")
    metric = MetricService.dbar_distributions if args.command == "dbar" else MetricService.fbar_distributions
    result = metric(first, second, args.exact_limit)
    emit({"value": result.value, **result.provenance()})


def entropy_command(args):
    estimate = EntropyService.entropy_rate_estimate(system_sample(args), args.N, args.k)
    if args.bits:
        estimate = estimate.in_bits()
    emit({"value": estimate.value, "units": estimate.units, "standard_error": estimate.standard_error,
          "flags": list(estimate.flags)})


def diagnostic_command(args):
    if args.command == "rwm":
        extension = load_extension(args)
        pairs = DiagnosticService.pair_family(extension, args.pairs)
        report = DiagnosticService.rwm_verdict(extension, pairs, args.schedule, args.M, args.tol, args.windows,
                                               args.seed)
    elif args.command == "relmix":
        extension = load_extension(args)
        observable = DiagnosticService.centered_fiber_half(extension)
        report = DiagnosticService.relative_mixing_statistic(extension, observable, observable, args.lag,
                                                             args.windows, args.seed)
    elif args.command == "kcheck":
        report = DiagnosticService.k_property_check(system_sample(args), args.N, args.k0, args.k1, args.eps,
                                                    args.delta, args.entropy_rate)
    elif args.command == "vlb" and args.zero_entropy:
        report = DiagnosticService.vlb_zero_entropy(system_sample(args), args.N, args.eps, floor=args.floor)
    else:
        statistic = DiagnosticService.vwb_statistic if args.command == "vwb" else DiagnosticService.vlb_statistic
        report = statistic(system_sample(args), args.N, args.k, args.eps, args.floor, args.exact_limit)
    emit(report.to_dict(), report.trace, args.csv)


def experiment_command(args):
    config = ExperimentService.apply_overrides(FileService.load_experiment_config(args.config))
    if args.workers:
        config = config.model_copy(update={"workers": args.workers})
    run = args.run or next(iter(config.diagnostic), None)
    if run not in RUNS:
        raise ParameterError(f"cannot tell which experiment to run, pass --run with one of {RUNS}")
    if run == "entropy":
        result = ExperimentService.run_entropy_genericity(config)
    elif run == "rwm":
        result = ExperimentService.run_rwm_genericity(config)
    else:
        result = ExperimentService.run_class_preservation(config, run)
    out_dir = args.out or config.output_dir or "."
    paths = FileService.emit_report(result, out_dir)
    emit({"experiment": result.experiment, "pass_rate": result.pass_rate,
          "confidence_interval": list(result.confidence_interval), "files": paths})


def add_sample_arguments(parser):
    parser.add_argument("--system", help="TOML system description")
    parser.add_argument("--sample", help="trajectory file to analyse instead of sampling")
    parser.add_argument("--partition", default="gen", help="gen or dyadic:<n>")
    parser.add_argument("--steps", type=int, default=1_000_000)
    parser.add_argument("--burn-in", type=int, default=0)
    parser.add_argument("--dump", help="write the sampled trajectory to this file")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    default_seed = settings.seed if settings.seed is not None else 0
    parser = argparse.ArgumentParser(prog="ergolab", description="Finitary diagnostics for measure-preserving systems")
    parser.add_argument("--version", action="version", version=f"ergolab {VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    for name in ("dbar", "fbar"):
        distance = commands.add_parser(name, help=f"{name} distance between words or word distributions")
        distance.add_argument("--words", nargs=2, metavar=("U", "V"))
        distance.add_argument("--dist", nargs=2, metavar=("P", "Q"))
        distance.add_argument("--exact-limit", type=int, default=settings.exact_limit)
        distance.set_defaults(handler=distance_command)

    entropy = commands.add_parser("entropy", help="entropy rate estimate of a sampled orbit")
    add_sample_arguments(entropy)
    entropy.add_argument("--N", type=int, required=True)
    entropy.add_argument("--k", type=int, default=None)
    entropy.add_argument("--seed", type=int, default=default_seed)
    entropy.add_argument("--bits", action="store_true")
    entropy.set_defaults(handler=entropy_command)

    for name in ("vwb", "vlb", "kcheck"):
        diagnostic = commands.add_parser(name, help=f"{name} diagnostic on a sampled orbit")
        add_sample_arguments(diagnostic)
        diagnostic.add_argument("--N", type=int, default=4)
        diagnostic.add_argument("--k", type=int, default=4)
        diagnostic.add_argument("--k0", type=int, default=2)
        diagnostic.add_argument("--k1", type=int, default=8)
        diagnostic.add_argument("--eps", type=float, default=0.1)
        diagnostic.add_argument("--delta", type=float, default=0.1)
        diagnostic.add_argument("--entropy-rate", type=float, default=None)
        diagnostic.add_argument("--floor", type=int, default=settings.occupancy_floor)
        diagnostic.add_argument("--exact-limit", type=int, default=settings.exact_limit)
        diagnostic.add_argument("--zero-entropy", action="store_true", help="vlb clique check for zero entropy")
        diagnostic.add_argument("--seed", type=int, default=default_seed)
        diagnostic.add_argument("--csv", action="store_true", help="print the trace table as CSV")
        diagnostic.set_defaults(handler=diagnostic_command)

    for name in ("rwm", "relmix"):
        diagnostic = commands.add_parser(name, help=f"{name} diagnostic of a skew product")
        diagnostic.add_argument("--system", required=True)
        diagnostic.add_argument("--pairs", nargs="+", default=["fiber_half"])
        diagnostic.add_argument("--schedule", nargs="+", type=int, default=[64, 256, 1024])
        diagnostic.add_argument("--M", type=int, default=None)
        diagnostic.add_argument("--tol", type=float, default=0.05)
        diagnostic.add_argument("--lag", type=int, default=16)
        diagnostic.add_argument("--windows", type=int, default=256)
        diagnostic.add_argument("--seed", type=int, default=default_seed)
        diagnostic.add_argument("--csv", action="store_true", help="print the trace table as CSV")
        diagnostic.set_defaults(handler=diagnostic_command)

    experiment = commands.add_parser("experiment", help="seeded batch experiment over random cocycles")
    experiment.add_argument("--config", required=True)
    experiment.add_argument("--out")
    experiment.add_argument("--workers", type=int, default=None)
    experiment.add_argument("--run", choices=RUNS)
    experiment.set_defaults(handler=experiment_command)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=get_settings().log_level, format="%(levelname)s %(message)s")
    try:
        args.handler(args)
    except ErgolabError as e:
        logging.error(e.message)
        return e.exit_code
    except Exception as e:
        logging.exception(e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

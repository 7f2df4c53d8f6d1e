import csv
import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
from pydantic import TypeAdapter, ValidationError

from errors.ergolab_error import InputValidationError
from models.core import Word, WordDistribution
from models.experiment import ExperimentConfig, ExperimentResult
from models.system import CellDrivenCocycle, FiberMap, SystemModel, TrajectorySample

REPORT_COLUMNS = ("trial", "seed", "statistic", "value", "verdict", "flags", "values")


def _parse_header(line: str, keys) -> dict:
    try:
        fields = dict(item.split("=", 1) for item in line.split())
        return {key: int(fields[key]) for key in keys}
    except (KeyError, ValueError):
        raise InputValidationError(f"malformed header {line.strip()!r}, expected {' '.join(k + '=<n>' for k in keys)}")


class FileService:

    @classmethod
    def read_words(cls, path: str) -> list:
        """Words file: a header `alphabet=<k> length=<n>`, then one word of space-separated symbols per line."""
        with open(path) as handle:
            header = _parse_header(handle.readline(), ("alphabet", "length"))
            words = []
            for number, line in enumerate(handle, start=2):
                if not line.strip():
                    continue
                try:
                    word = Word(symbols=tuple(int(s) for s in line.split()), alphabet_size=header["alphabet"])
                except (ValueError, ValidationError) as e:
                    raise InputValidationError(f"{path}:{number}: {e}")
                if word.length != header["length"]:
                    raise InputValidationError(f"{path}:{number}: word has length {word.length}")
                words.append(word)
        return words

    @classmethod
    def write_words(cls, words, alphabet_size: int, path: str):
        with open(path, "w") as handle:
            handle.write(f"alphabet={alphabet_size} length={len(words[0])}\n")
            for word in words:
                handle.write(f"{word}\n")

    @classmethod
    def read_distribution(cls, path: str) -> WordDistribution:
        """CSV with columns word,probability; words are space-separated symbols."""
        weights = {}
        with open(path, newline="") as handle:
            for row in csv.DictReader(handle):
                try:
                    weights[tuple(int(s) for s in row["word"].split())] = float(row["probability"])
                except (KeyError, ValueError) as e:
                    raise InputValidationError(f"{path}: malformed row {row}: {e}")
        if not weights:
            raise InputValidationError(f"{path}: distribution is empty")
        try:
            return WordDistribution(length=len(next(iter(weights))), weights=weights)
        except ValidationError as e:
            raise InputValidationError(f"{path}: {e}")

    @classmethod
    def write_distribution(cls, distribution: WordDistribution, path: str):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["word", "probability"])
            for word in sorted(distribution.weights):
                writer.writerow([" ".join(map(str, word)), repr(distribution.weights[word])])

    @classmethod
    def _read_toml(cls, path: str) -> dict:
        try:
            with open(path, "rb") as handle:
                return tomllib.load(handle)
        except tomllib.TOMLDecodeError as e:
            raise InputValidationError(f"{path}: {e}")

    @classmethod
    def load_system(cls, path: str):
        """System description in TOML, either at top level or under a [system] table."""
        data = cls._read_toml(path)
        try:
            return TypeAdapter(SystemModel).validate_python(data.get("system", data))
        except ValidationError as e:
            raise InputValidationError(f"{path}: {e}")

    @classmethod
    def load_cocycle_table(cls, path: str) -> CellDrivenCocycle:
        """CSV with columns cell,rotation_steps, one row per base cell."""
        steps = {}
        with open(path, newline="") as handle:
            for row in csv.DictReader(handle):
                try:
                    steps[int(row["cell"])] = int(row["rotation_steps"])
                except (KeyError, ValueError) as e:
                    raise InputValidationError(f"{path}: malformed row {row}: {e}")
        if sorted(steps) != list(range(len(steps))):
            raise InputValidationError(f"{path}: cells must be numbered 0..{len(steps) - 1}")
        return CellDrivenCocycle(fiber_maps=tuple(FiberMap.rotation(steps[c]) for c in range(len(steps))))

    @classmethod
    def read_trajectory(cls, path: str) -> TrajectorySample:
        with open(path) as handle:
            header = _parse_header(handle.readline(), ("cells", "length", "seed"))
            labels = np.loadtxt(handle, dtype=np.int64, ndmin=1)
        if labels.size != header["length"]:
            raise InputValidationError(f"{path}: header announces {header['length']} symbols, found {labels.size}")
        return TrajectorySample(labels=labels, cell_count=header["cells"], seed=header["seed"])

    @classmethod
    def dump_trajectory(cls, sample: TrajectorySample, path: str):
        """Header `cells=<k> length=<n> seed=<s>`, then one symbol per line."""
        with open(path, "w") as handle:
            handle.write(f"cells={sample.cell_count} length={sample.length} seed={sample.seed}\n")
            np.savetxt(handle, sample.labels, fmt="%d")

    @classmethod
    def load_experiment_config(cls, path: str) -> ExperimentConfig:
        try:
            return ExperimentConfig.model_validate(cls._read_toml(path))
        except ValidationError as e:
            raise InputValidationError(f"{path}: {e}")

    @classmethod
    def emit_report(cls, result: ExperimentResult, out_dir: str, formats=("csv", "json")) -> list:
        """Writes <experiment>.csv (one row per trial and diagnostic) and/or <experiment>.json."""
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        if "csv" in formats:
            path = os.path.join(out_dir, f"{result.experiment}.csv")
            with open(path, "w", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(REPORT_COLUMNS)
                for record in result.trials:
                    for report in record.reports:
                        writer.writerow([
                            record.trial,
                            record.seed,
                            report.statistic,
                            repr(report.value),
                            "" if report.verdict is None else str(report.verdict).lower(),
                            ";".join(report.flags),
                            json.dumps(report.values, sort_keys=True),
                        ])
            paths.append(path)
        if "json" in formats:
            path = os.path.join(out_dir, f"{result.experiment}.json")
            with open(path, "w") as handle:
                handle.write(result.model_dump_json(indent=2))
                handle.write("\n")
            paths.append(path)
        return paths

    @classmethod
    def read_result(cls, path: str) -> ExperimentResult:
        with open(path) as handle:
            return ExperimentResult.model_validate_json(handle.read())

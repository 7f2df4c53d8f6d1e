import numpy as np
import pytest

from errors.ergolab_error import HypothesisViolationError, InputValidationError
from models.core import Word, WordDistribution
from models.system import SkewProduct, TfTriple, TrajectorySample
from services.file_service import FileService

SKEW_TOML = """
[system]
kind = "skew_product"
fiber_grid = 8

[system.base]
kind = "bernoulli"
p = [0.5, 0.5]

[system.cocycle]
kind = "random"
seed = 4
"""

T_F_TOML = """
[system]
kind = "t_f"
rotation_steps = 1
fiber_grid = 8
f_values = [{f_values}]

[system.base]
kind = "bernoulli"
p = [0.5, 0.5]

[system.cells]
cell_of = [0, 1]
"""


def test_words_file(tmp_path):
    path = tmp_path / "words.txt"
    FileService.write_words([Word(symbols=(0, 1, 2), alphabet_size=3)], 3, str(path))

    assert path.read_text() == "alphabet=3 length=3\n0 1 2\n"
    assert FileService.read_words(str(path)) == [Word(symbols=(0, 1, 2), alphabet_size=3)]


@pytest.mark.parametrize("content", ["length=3\n0 1 2\n", "alphabet=2 length=3\n0 1 2\n", "alphabet=2 length=2\n0\n"])
def test_malformed_words_files(tmp_path, content):
    path = tmp_path / "words.txt"
    path.write_text(content)

    with pytest.raises(InputValidationError):
        FileService.read_words(str(path))


def test_distribution_file(tmp_path):
    path = tmp_path / "p.csv"
    distribution = WordDistribution(length=2, weights={(0, 1): 0.25, (1, 1): 0.75})

    FileService.write_distribution(distribution, str(path))

    assert FileService.read_distribution(str(path)) == distribution


def test_distribution_file_must_sum_to_one(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("word,probability\n0 1,0.5\n1 1,0.4\n")

    with pytest.raises(InputValidationError):
        FileService.read_distribution(str(path))


def test_load_nested_system(tmp_path):
    path = tmp_path / "system.toml"
    path.write_text(SKEW_TOML)

    system = FileService.load_system(str(path))

    assert isinstance(system, SkewProduct)
    assert system.cocycle.kind == "random"


def test_load_system_rejects_unknown_kinds(tmp_path):
    path = tmp_path / "system.toml"
    path.write_text('kind = "baker"\n')

    with pytest.raises(InputValidationError):
        FileService.load_system(str(path))


def test_cocycle_table(tmp_path):
    path = tmp_path / "cocycle.csv"
    path.write_text("cell,rotation_steps\n0,0\n1,3\n")

    cocycle = FileService.load_cocycle_table(str(path))

    assert [m.steps for m in cocycle.fiber_maps] == [0, 3]


def test_trajectory_dump(tmp_path):
    path = tmp_path / "orbit.txt"
    sample = TrajectorySample(labels=np.array([0, 2, 1, 1]), cell_count=3, seed=9)

    FileService.dump_trajectory(sample, str(path))
    loaded = FileService.read_trajectory(str(path))

    assert path.read_text().splitlines()[0] == "cells=3 length=4 seed=9"
    np.testing.assert_array_equal(loaded.labels, sample.labels)


def test_load_balanced_t_f(tmp_path):
    path = tmp_path / "t_f.toml"
    path.write_text(T_F_TOML.format(f_values="1, -1"))

    system = FileService.load_system(str(path))

    assert isinstance(system, TfTriple)
    assert system.f_values == (1, -1)


def test_load_system_refuses_unbalanced_t_f(tmp_path):
    path = tmp_path / "t_f.toml"
    path.write_text(T_F_TOML.format(f_values="1, 0"))

    with pytest.raises(HypothesisViolationError):
        FileService.load_system(str(path))

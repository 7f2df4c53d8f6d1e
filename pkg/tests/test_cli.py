import json

import ergolab
from errors.ergolab_error import PreconditionRefusedError
from settings import ErgolabSettings

EXPERIMENT_TOML = """
name = "refused"
master_seed = 3
sample_length = 5000

[base]
kind = "permutation"
sigma = [1, 0]

[cocycles]
count = 2
fiber_grid = 4

[diagnostic.vwb]
n = 4
k = 2
"""


def test_fbar_on_word_files(tmp_path, capsys):
    first, second = tmp_path / "u.txt", tmp_path / "v.txt"
    first.write_text("alphabet=2 length=4\n0 1 0 1\n")
    second.write_text("alphabet=2 length=4\n1 0 1 0\n")

    assert ergolab.main(["fbar", "--words", str(first), str(second)]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 0.25


def test_dbar_on_distribution_files(tmp_path, capsys):
    first, second = tmp_path / "p.csv", tmp_path / "q.csv"
    first.write_text("word,probability\n0 0,0.5\n1 1,0.5\n")
    second.write_text("word,probability\n0 1,0.5\n1 0,0.5\n")

    assert ergolab.main(["dbar", "--dist", str(first), str(second), "--exact-limit", "100"]) == 0
    output = json.loads(capsys.readouterr().out)
    assert output["method"] == "exact"
    assert abs(output["value"] - 0.5) < 1e-9


def test_entropy_of_a_sampled_system(tmp_path, capsys):
    system = tmp_path / "coin.toml"
    system.write_text('kind = "bernoulli"\np = [0.5, 0.5]\n')

    assert ergolab.main(["entropy", "--system", str(system), "--N", "2", "--steps", "20000", "--bits"]) == 0
    output = json.loads(capsys.readouterr().out)
    assert output["units"] == "bits"
    assert abs(output["value"] - 1.0) < 0.02


def test_vwb_trace_as_csv(tmp_path, capsys):
    orbit = tmp_path / "orbit.txt"
    orbit.write_text("cells=2 length=1000 seed=0\n" + "0\n1\n" * 500)

    assert ergolab.main(["vwb", "--sample", str(orbit), "--N", "4", "--k", "2", "--csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "past,mass,distance,method"
    assert len(lines) == 3


def test_experiment_refusal_exits_with_two(tmp_path):
    config = tmp_path / "experiment.toml"
    config.write_text(EXPERIMENT_TOML)

    assert ergolab.main(["experiment", "--config", str(config), "--out", str(tmp_path / "out")]) == 2


def test_missing_file_exits_with_one(tmp_path):
    assert ergolab.main(["fbar", "--words", str(tmp_path / "u.txt"), str(tmp_path / "v.txt")]) == 1


def test_workers_flag_beats_the_environment(tmp_path, mocker):
    config = tmp_path / "experiment.toml"
    config.write_text(EXPERIMENT_TOML)
    mocker.patch("services.experiment_service.get_settings", return_value=ErgolabSettings(workers=4))
    run = mocker.patch("ergolab.ExperimentService.run_class_preservation",
                       side_effect=PreconditionRefusedError("stop"))

    assert ergolab.main(["experiment", "--config", str(config), "--workers", "2"]) == 2
    assert run.call_args.args[0].workers == 2

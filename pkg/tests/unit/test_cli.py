"""
Unit tests for the command-line interface.
"""

import pytest
import yaml
from click.testing import CliRunner

from src import __version__
from src.cli import cli, main

SMALL_CONFIG = {
    "event_log": "out/event_log.csv",
    "ontology": "out/ontology.json",
    "output_dir": "out",
    "synth_n_types": 3,
    "synth_activities_per_type": 2,
    "synth_n_traces": 40,
    "synth_max_length": 8,
    "synth_mean_length": 5.0,
    "d_model": 8,
    "hidden": 8,
    "heads": 2,
    "layers": 1,
    "spe_k": 4,
    "epochs": 2,
    "batch_size": 16,
    "n_fits": 1,
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "small.yaml").write_text(yaml.safe_dump(SMALL_CONFIG))
    return tmp_path


def _run(runner, *args):
    return runner.invoke(cli, ["-c", "small.yaml", *args], obj={})


class TestCli:
    """Test suite for CLI commands."""

    def test_version(self, runner):
        result = runner.invoke(cli, ["version"])

        assert result.exit_code == 0
        assert __version__ in result.output

    def test_help_lists_commands(self, runner):
        result = runner.invoke(cli, ["--help"])

        for command in ("synth", "stats", "train", "eval", "tune", "encode-graph"):
            assert command in result.output

    def test_synth_and_stats(self, runner, workspace):
        assert _run(runner, "synth").exit_code == 0

        result = _run(runner, "stats")

        assert result.exit_code == 0
        assert "traces: 40" in result.output
        assert "Trace lengths" in result.output

    def test_train_and_eval(self, runner, workspace):
        _run(runner, "synth")

        trained = _run(runner, "train", "--pe", "spe", "--size", "8", "--epochs", "1")
        evaluated = _run(runner, "eval", "--checkpoint", "out/checkpoints/spe_8", "--split", "test")

        assert trained.exit_code == 0, trained.output
        assert "acc@1" in trained.output
        assert (workspace / "out" / "results_table.csv").is_file()
        assert evaluated.exit_code == 0, evaluated.output
        assert "positions:" in evaluated.output

    def test_tune(self, runner, workspace):
        _run(runner, "synth")

        result = _run(runner, "tune", "--budget", "2")

        assert result.exit_code == 0, result.output
        assert len((workspace / "out" / "trials.csv").read_text().splitlines()) == 3

    def test_encode_graph(self, runner, workspace):
        _run(runner, "synth")

        result = _run(runner, "encode-graph", "-k", "2", "-o", "emb.csv")

        assert result.exit_code == 0
        assert (workspace / "emb.csv").read_text().startswith("node,kind,c1,c2")

    def test_quiet(self, runner, workspace):
        result = _run(runner, "-q", "synth")

        assert result.exit_code == 0
        assert "Event log" not in result.output

    def test_invalid_choice(self, runner, workspace):
        result = _run(runner, "train", "--pe", "rotary")

        assert result.exit_code == 2


class TestMain:
    """Test suite for exit-code mapping."""

    def test_success(self, workspace):
        with pytest.raises(SystemExit) as exc:
            main(["version"])

        assert exc.value.code == 0

    def test_missing_event_log_is_data_error(self, workspace):
        with pytest.raises(SystemExit) as exc:
            main(["-c", "small.yaml", "stats", "--log", "absent.csv"])

        assert exc.value.code == 2

    def test_configuration_error(self, workspace):
        with pytest.raises(SystemExit) as exc:
            main(["-c", "missing.yaml", "stats"])

        assert exc.value.code == 1

    def test_usage_error(self, workspace):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--pe", "rotary"])

        assert exc.value.code == 1

    @pytest.mark.parametrize("content", [
        b"\xff\xfecase_id,activity,timestamp\n",
        b'case_id,activity,timestamp\n"c1,a,1\n',
    ])
    def test_unreadable_event_log_is_data_error(self, workspace, content, capsys):
        (workspace / "bad.csv").write_bytes(content)

        with pytest.raises(SystemExit) as exc:
            main(["-c", "small.yaml", "stats", "--log", "bad.csv"])

        assert exc.value.code == 2
        assert "Error:" in capsys.readouterr().err

    def test_unwritable_output_is_io_error(self, workspace):
        (workspace / "blocked").write_text("a file, not a directory\n")

        with pytest.raises(SystemExit) as exc:
            main(["-c", "small.yaml", "--out", "blocked/out", "synth"])

        assert exc.value.code == 2

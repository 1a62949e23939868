"""
Test suite for the command-line interface: exit codes, flag conflicts and
environment-variable options.
"""

import logging
from pathlib import Path

import pytest
from typer.testing import CliRunner

from ssl_curriculum.cli import app
from ssl_curriculum.commands.common import CHECKPOINT_NAME, METRICS_NAME
from ssl_curriculum.config import RESOLVED_CONFIG_NAME

runner = CliRunner()


@pytest.fixture(autouse=True)
def restore_root_logging():
    """The CLI reconfigures root logging onto the runner's streams."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def config_file(tiny_config, tmp_path):
    """The tiny experiment config written as a flat YAML file."""
    return tiny_config.write_resolved(tmp_path / "config", seeds=[0])


class TestGenPermsCli:

    def test_prints_distance_and_writes_file(self, tmp_path):
        out = tmp_path / "perms.txt"
        result = runner.invoke(app, ["gen-perms", "--n-patches", "4", "--set-size", "12", "--seed", "0", "--out", str(out)])

        assert result.exit_code == 0, result.output
        assert "min pairwise distance:" in result.output
        assert out.read_text().splitlines()[0] == "4 12"

    def test_default_grid_is_two_by_two(self, tmp_path):
        """Without --n-patches the set permutes the four patches of a 2x2 grid."""
        out = tmp_path / "perms.txt"
        result = runner.invoke(app, ["gen-perms", "--set-size", "12", "--out", str(out)])

        assert result.exit_code == 0, result.output
        assert out.read_text().splitlines()[0] == "4 12"

    def test_rerun_is_byte_identical(self, tmp_path):
        args = ["gen-perms", "--n-patches", "9", "--set-size", "12", "--seed", "1"]
        runner.invoke(app, args + ["--out", str(tmp_path / "a.txt")])
        runner.invoke(app, args + ["--out", str(tmp_path / "b.txt")])
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()

    def test_oversized_set_exits_nonzero(self, tmp_path):
        out = tmp_path / "perms.txt"
        result = runner.invoke(app, ["gen-perms", "--n-patches", "4", "--set-size", "25", "--out", str(out)])
        assert result.exit_code == 2
        assert not out.exists()


class TestPretrainCli:

    def test_missing_dataset_path(self, config_file):
        result = runner.invoke(app, ["pretrain", "--config", str(config_file), "--dataset", "stl10"])
        assert result.exit_code == 2
        assert "--dataset-path" in result.output

    @pytest.mark.parametrize("args", [
        ["--mode", "fixed", "--schedule-start", "0.9"],
        ["--mode", "fixed", "--difficulty", "empirical"],
        ["--mode", "curriculum", "--retention", "0.9"],
    ])
    def test_conflicting_flags(self, config_file, args):
        result = runner.invoke(app, ["pretrain", "--config", str(config_file)] + args)
        assert result.exit_code == 2
        assert "conflict" in result.output

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("batchsize: 4\n")
        result = runner.invoke(app, ["pretrain", "--config", str(path)])
        assert result.exit_code == 2

    def test_output_dir_from_environment(self, config_file, tmp_path):
        """SSLC_OUTPUT_DIR overrides the config file's output_dir."""
        out = tmp_path / "from-env"
        result = runner.invoke(
            app, ["pretrain", "--config", str(config_file), "--epochs", "1"], env={"SSLC_OUTPUT_DIR": str(out)}
        )

        assert result.exit_code == 0, result.output
        run_dir = out / "fixed-0.95" / "seed-0"
        assert (run_dir / CHECKPOINT_NAME).is_file()
        assert len((run_dir / METRICS_NAME).read_text().splitlines()) == 1

        # transfer-eval falls back to the checkpoint's own resolved config
        result = runner.invoke(app, ["transfer-eval", "--checkpoint", str(run_dir / CHECKPOINT_NAME), "--seeds", "0,1"])
        assert result.exit_code == 0, result.output
        assert len((run_dir / METRICS_NAME).read_text().splitlines()) == 3
        assert (run_dir / RESOLVED_CONFIG_NAME).is_file()


class TestOtherCommandsCli:

    def test_transfer_eval_needs_a_source(self, config_file):
        result = runner.invoke(app, ["transfer-eval", "--config", str(config_file)])
        assert result.exit_code == 2

    def test_transfer_eval_bad_seeds(self, config_file):
        result = runner.invoke(app, ["transfer-eval", "--config", str(config_file), "--from-scratch", "--seeds", "a,b"])
        assert result.exit_code == 2

    def test_compare_empty_directory(self, tmp_path):
        (tmp_path / "runs").mkdir()
        result = runner.invoke(app, ["compare", "--runs", str(tmp_path / "runs"), "--out", str(tmp_path / "out")])
        assert result.exit_code != 0

    def test_neighbors_missing_checkpoint(self, config_file, tmp_path):
        result = runner.invoke(app, ["neighbors", "--config", str(config_file), "--checkpoint", str(tmp_path / "x.bin")])
        assert result.exit_code == 2

    def test_invalid_log_level(self, tmp_path):
        result = runner.invoke(app, ["--log-level", "chatty", "compare", "--runs", str(tmp_path), "--out", str(tmp_path)])
        assert result.exit_code == 2

"""
Tests for the compare command.
"""

import pandas as pd
import pytest

from ssl_curriculum.commands import compare
from ssl_curriculum.commands.common import METRICS_NAME
from ssl_curriculum.commands.compare import load_records
from ssl_curriculum.config import ExperimentConfig
from ssl_curriculum.training import DownstreamResult, EpochMetrics, RunRecord


def write_run(run_dir, config, accuracies, with_config=True):
    record = RunRecord(run_id=config.run_id(0), seed=0)
    for epoch in (1, 2):
        record.add_epoch(EpochMetrics(epoch=epoch, train_acc=0.5, test_acc=0.1 * epoch, wall_time_s=0.0,
                                      level_retention=config.retention))
    for seed, acc in enumerate(accuracies):
        record.add_downstream(DownstreamResult(downstream_seed=seed, accuracy=acc))
    record.save(run_dir / METRICS_NAME)
    if with_config:
        config.write_resolved(run_dir, seeds=[0])


class TestCompare:
    """Test aggregation over a runs directory."""

    def test_table_per_condition(self, tmp_path):
        runs = tmp_path / "runs"
        write_run(runs / "a" / "seed-0", ExperimentConfig(mode="curriculum"), [0.5, 0.7])
        write_run(runs / "b" / "seed-0", ExperimentConfig(retention=0.9), [0.4])
        write_run(runs / "c" / "seed-1", ExperimentConfig(retention=0.9), [0.6])

        result = compare(runs, tmp_path / "out")

        assert result["success"] is True, result
        table = {row["condition"]: row for row in result["data"]["table"]}
        assert set(table) == {"curriculum", "fixed-0.90"}
        assert table["fixed-0.90"]["n_seeds"] == 2
        assert table["curriculum"]["mean_acc"] == pytest.approx(0.6)
        assert result["metadata"]["runs"] == 3

        frame = pd.read_csv(tmp_path / "out" / "comparison.csv")
        assert frame["condition"].tolist() == ["curriculum", "fixed-0.90"]
        assert (tmp_path / "out" / "plots" / "downstream_accuracy.png").is_file()
        assert (tmp_path / "out" / "plots" / "pretext_accuracy.png").is_file()

    def test_directory_name_without_config(self, tmp_path):
        write_run(tmp_path / "runs" / "legacy", ExperimentConfig(), [0.5], with_config=False)
        assert [r.condition for r in load_records(tmp_path / "runs")] == ["legacy"]

    def test_run_without_downstream(self, tmp_path):
        """A pretrained but not yet evaluated run is left out of the table."""
        runs = tmp_path / "runs"
        write_run(runs / "a", ExperimentConfig(), [0.5])
        write_run(runs / "b", ExperimentConfig(mode="curriculum"), [])

        result = compare(runs, tmp_path / "out")

        assert result["success"] is True, result
        assert [row["condition"] for row in result["data"]["table"]] == ["fixed-0.95"]
        assert result["data"]["skipped"] == [ExperimentConfig(mode="curriculum").run_id(0)]

    def test_no_run_with_downstream(self, tmp_path):
        write_run(tmp_path / "runs" / "b", ExperimentConfig(mode="curriculum"), [])

        result = compare(tmp_path / "runs", tmp_path / "out")

        assert result["error"]["type"] == "format_error"

    def test_empty_directory(self, tmp_path):
        (tmp_path / "runs").mkdir()
        result = compare(tmp_path / "runs", tmp_path / "out")
        assert result["error"]["type"] == "validation_error"

    def test_missing_directory(self, tmp_path):
        result = compare(tmp_path / "nowhere", tmp_path / "out")
        assert result["error"]["type"] == "usage_error"

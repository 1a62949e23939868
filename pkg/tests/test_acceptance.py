"""
Desk-scale experiments on the synthetic dataset.

These run full pretraining and fine-tuning on CPU and take minutes to hours,
so they are deselected by default; run them with ``pytest -m slow``.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from ssl_curriculum import commands
from ssl_curriculum.commands.common import CHECKPOINT_NAME, METRICS_NAME
from ssl_curriculum.config import ExperimentConfig
from ssl_curriculum.curriculum import level_accuracy_trend
from ssl_curriculum.training import RunRecord

pytestmark = pytest.mark.slow

PRETEXT_SEEDS = [0, 1, 2]
DOWNSTREAM_SEEDS = [0, 1, 2, 3, 4]


def base_config(output_dir: Path) -> ExperimentConfig:
    return ExperimentConfig(
        grid_n=2,
        set_size=12,
        input_size=32,
        synthetic_images=2000,
        synthetic_train=500,
        synthetic_test=800,
        synthetic_size=64,
        pretext_epochs=10,
        downstream_epochs=10,
        schedule_start=1.0,
        schedule_end=0.80,
        schedule_step=0.05,
        epochs_per_level=2,
        output_dir=str(output_dir),
    )


def pretrain_runs(config: ExperimentConfig) -> list:
    result = commands.pretrain(config)
    assert result["success"], result
    return result["data"]["runs"]


def downstream_accuracies(config: ExperimentConfig, run: dict) -> list:
    checkpoint = Path(run["run_dir"]) / CHECKPOINT_NAME
    result = commands.transfer_eval(config, checkpoint=checkpoint, seeds=DOWNSTREAM_SEEDS)
    assert result["success"], result
    return [r["final_downstream_test_acc"] for r in result["data"]["results"]]


@pytest.fixture(scope="module")
def experiment_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("experiments")


@pytest.fixture(scope="module")
def curriculum_runs(experiment_dir):
    config = replace(base_config(experiment_dir), mode="curriculum", seeds=PRETEXT_SEEDS)
    return config, pretrain_runs(config)


class TestLearnability:
    """The jigsaw task is learnable on synthetic data, with and without jitter."""

    @pytest.mark.parametrize("retention, threshold", [(1.0, 0.90), (0.80, 0.25)])
    def test_pretext_accuracy(self, experiment_dir, retention, threshold):
        config = replace(
            base_config(experiment_dir / f"learnability-{retention}"), retention=retention, seeds=PRETEXT_SEEDS
        )
        for run in pretrain_runs(config):
            assert run["final_pretext_test_acc"] > threshold, run


class TestCurriculumTrend:
    """Harder levels start below what the first level reached."""

    def test_first_level_beats_start_of_last_level(self, curriculum_runs):
        _, runs = curriculum_runs
        trends = [
            level_accuracy_trend(RunRecord.load(Path(run["run_dir"]) / METRICS_NAME)) for run in runs
        ]
        first_level = np.mean([first for first, _ in trends])
        last_level_start = np.mean([last for _, last in trends])
        assert first_level > last_level_start


class TestDownstreamTransfer:
    """Curriculum pretraining transfers at least as well as fixed strong jitter and no pretraining."""

    def test_curriculum_not_worse(self, experiment_dir, curriculum_runs):
        """Every pretext seed is fine-tuned with every downstream seed: 15 accuracies per pretrained condition."""
        curriculum_config, runs = curriculum_runs
        curriculum = np.mean([acc for run in runs for acc in downstream_accuracies(curriculum_config, run)])

        fixed_config = replace(base_config(experiment_dir), retention=0.80, seeds=PRETEXT_SEEDS)
        fixed = np.mean([acc for run in pretrain_runs(fixed_config) for acc in downstream_accuracies(fixed_config, run)])

        scratch_result = commands.transfer_eval(base_config(experiment_dir), from_scratch=True, seeds=DOWNSTREAM_SEEDS)
        assert scratch_result["success"], scratch_result
        scratch = np.mean([r["final_downstream_test_acc"] for r in scratch_result["data"]["results"]])

        assert curriculum >= fixed
        assert curriculum >= scratch

        # Learnability runs under the same directory were never fine-tuned and are skipped
        comparison = commands.compare(experiment_dir, experiment_dir / "comparison")
        assert comparison["success"], comparison
        seeds_per_condition = {row["condition"]: row["n_seeds"] for row in comparison["data"]["table"]}
        assert seeds_per_condition == {
            "curriculum": len(PRETEXT_SEEDS) * len(DOWNSTREAM_SEEDS),
            "fixed-0.80": len(PRETEXT_SEEDS) * len(DOWNSTREAM_SEEDS),
            "scratch": len(DOWNSTREAM_SEEDS),
        }

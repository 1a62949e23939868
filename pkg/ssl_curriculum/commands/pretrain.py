"""
Pretext pretraining command.

Runs fixed-jitter or curriculum pretraining once per configured seed and
lays out one self-contained run directory per seed:

    <output_dir>/<condition>/seed-<seed>/
        config.resolved  checkpoint.bin  metrics.jsonl  permutations.txt  plots/
"""

import logging
from typing import Any, Dict, List

from ssl_curriculum.commands.common import (
    CHECKPOINT_NAME,
    METRICS_NAME,
    PLOTS_DIR,
    build_task,
    check_config,
    error_response_for,
    load_experiment_splits,
    run_directory,
)
from ssl_curriculum.config import ExperimentConfig
from ssl_curriculum.curriculum import (
    CurriculumSchedule,
    measure_empirical_difficulty,
    pretrain_fixed,
    run_curriculum,
)
from ssl_curriculum.evaluation import LINE_CHART, plot_pretext_curves
from ssl_curriculum.model import save_checkpoint
from ssl_curriculum.training import RunRecord
from ssl_curriculum.utils import create_success_response, logged_command

logger = logging.getLogger(__name__)


def _schedule_for(config: ExperimentConfig, task, unlabeled, test, seed: int) -> CurriculumSchedule:
    schedule = config.schedule()
    if config.difficulty == "empirical":
        difficulty = measure_empirical_difficulty(
            unlabeled,
            task,
            schedule.levels,
            config.pretext_trainer(seed),
            probe_epochs=config.probe_epochs,
            eval_split=test,
            encoder_spec=config.encoder_spec(),
        )
        schedule = CurriculumSchedule.from_levels(schedule.levels, difficulty)
        logger.info(f"Empirical difficulty order: {schedule.retentions}")
    return schedule


def pretrain_seed(config: ExperimentConfig, seed: int, splits) -> Dict[str, Any]:
    """Pretrain one seed and persist its run directory; returns a summary."""
    run_dir = run_directory(config, seed)
    condition = config.condition_label()
    run_id = config.run_id(seed)
    logger.info(f"Pretraining {condition} seed {seed} into {run_dir} (run {run_id})")

    task = build_task(config, run_dir)
    unlabeled, _, test = splits
    # Pretext accuracy is measured on the held-out test images with labels discarded
    eval_images = test.without_labels()
    record = RunRecord(run_id=run_id, seed=seed, condition=condition)
    trainer_cfg = config.pretext_trainer(seed)

    if config.mode == "curriculum":
        schedule = _schedule_for(config, task, unlabeled, eval_images, seed)
        model, record = run_curriculum(
            unlabeled,
            task,
            schedule,
            trainer_cfg,
            config.epochs_per_level,
            eval_split=eval_images,
            encoder_spec=config.encoder_spec(),
            record=record,
        )
        levels = schedule.retentions
    else:
        level = config.transform_config().jitter
        model, record = pretrain_fixed(
            unlabeled,
            task,
            level,
            trainer_cfg,
            eval_split=eval_images,
            encoder_spec=config.encoder_spec(),
            record=record,
        )
        levels = [level.retention]

    config.write_resolved(run_dir, seeds=[seed], condition=condition)
    save_checkpoint(
        model,
        run_dir / CHECKPOINT_NAME,
        extra={"run_id": run_id, "seed": seed, "condition": condition, "task_kind": config.task_kind},
    )
    record.save(run_dir / METRICS_NAME)
    plot_pretext_curves([record], run_dir / PLOTS_DIR / LINE_CHART)

    last = record.rows[-1]
    return {
        "run_dir": str(run_dir),
        "run_id": run_id,
        "seed": seed,
        "condition": condition,
        "levels": levels,
        "epochs": len(record.rows),
        "final_pretext_train_acc": last.train_acc,
        "final_pretext_test_acc": last.test_acc,
    }


@logged_command
def pretrain(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Run pretext pretraining for every seed of the config.

    Returns:
        Dict containing:
        - success (bool): Whether all seeds finished
        - data (dict): condition and one summary per run
        - error (dict, optional): Error details (level_index for curriculum failures)
    """
    try:
        check_config(config)
        splits = load_experiment_splits(config)
        runs: List[Dict[str, Any]] = [pretrain_seed(config, seed, splits) for seed in config.seeds]

        return create_success_response(
            data={"condition": config.condition_label(), "runs": runs},
            metadata={"mode": config.mode, "task_kind": config.task_kind, "dataset": config.dataset},
        )

    except Exception as e:
        return error_response_for(e, "pretrain")

"""
Downstream transfer evaluation command.

Fine-tunes a copy of a pretrained encoder (or a freshly seeded one for the
no-pretraining baseline) once per downstream seed and appends the final test
accuracies to the run's metrics file. Linear-probe results for a checkpoint
are kept under a separate <condition>-linear run directory.
"""

import logging
from pathlib import Path
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Union

from ssl_curriculum.commands.common import (
    METRICS_NAME,
    check_config,
    error_response_for,
    load_experiment_splits,
)
from ssl_curriculum.config import ExperimentConfig
from ssl_curriculum.data import DatasetSplit
from ssl_curriculum.model import SharedEncoderClassifier, build_model, load_checkpoint
from ssl_curriculum.training import DownstreamResult, RunRecord, fine_tune
from ssl_curriculum.utils import UsageError, create_success_response, logged_command

logger = logging.getLogger(__name__)


SCRATCH_CONDITION = "scratch"


def _fine_tune_seed(
    pretext: Optional[SharedEncoderClassifier],
    config: ExperimentConfig,
    train: DatasetSplit,
    test: DatasetSplit,
    seed: int,
    linear_probe: bool,
) -> DownstreamResult:
    if pretext is None:
        # No pretraining: the encoder is initialized from the downstream seed
        pretext = build_model(config.encoder_spec(), n_inputs=1, out_classes=train.class_count, seed=seed)
    _, result = fine_tune(
        pretext,
        train,
        test,
        config.downstream_trainer(seed),
        downstream_seed=seed,
        normalize=config.transform_config().normalize,
        freeze_encoder=linear_probe,
    )
    return result


def _run_seeds(
    pretext: Optional[SharedEncoderClassifier],
    config: ExperimentConfig,
    train: DatasetSplit,
    test: DatasetSplit,
    seeds: List[int],
    linear_probe: bool,
    parallel: bool,
) -> List[DownstreamResult]:
    if not parallel or len(seeds) == 1:
        return [_fine_tune_seed(pretext, config, train, test, seed, linear_probe) for seed in seeds]

    logger.info(f"Fine-tuning {len(seeds)} seeds in a process pool")
    with ProcessPoolExecutor(max_workers=len(seeds)) as pool:
        futures = {
            seed: pool.submit(_fine_tune_seed, pretext, config, train, test, seed, linear_probe)
            for seed in seeds
        }
        return [futures[seed].result() for seed in sorted(futures)]


def _checkpoint_record(checkpoint: Path, extra: Dict[str, Any], linear_probe: bool):
    """
    Run directory and record that receive downstream results for a checkpoint.

    Fine-tuning results go next to the checkpoint. Linear-probe results go to
    a sibling condition <condition>-linear/<seed dir> so the two protocols
    never replace each other's rows.
    """
    run_dir = checkpoint.parent
    condition = str(extra.get("condition", "")) or run_dir.parent.name
    run_id = str(extra.get("run_id", ""))
    seed = int(extra.get("seed", 0))

    if linear_probe:
        condition = f"{condition}-linear"
        run_dir = run_dir.parent.parent / condition / run_dir.name

    metrics_path = run_dir / METRICS_NAME
    if metrics_path.exists():
        return run_dir, RunRecord.load(metrics_path, condition=condition)
    return run_dir, RunRecord(run_id=run_id, seed=seed, condition=condition)


@logged_command
def transfer_eval(
    config: ExperimentConfig,
    checkpoint: Optional[Union[str, Path]] = None,
    seeds: Optional[List[int]] = None,
    linear_probe: bool = False,
    from_scratch: bool = False,
    parallel: bool = False,
) -> Dict[str, Any]:
    """
    Fine-tune downstream classifiers and record their final test accuracy.

    Args:
        config: Resolved experiment config (encoder, downstream epochs, dataset)
        checkpoint: Pretrained checkpoint; its directory receives fine-tuning results,
            linear-probe results go to <condition>-linear/<seed dir> beside it
        seeds: Downstream seeds (default: config.seeds)
        linear_probe: Freeze the encoder and train only the head
        from_scratch: Skip pretraining; results go to <output_dir>/scratch
        parallel: Fine-tune seeds in separate processes

    Returns:
        Dict containing:
        - success (bool): Whether every seed finished
        - data (dict): run_dir, condition and one accuracy row per seed
        - error (dict, optional): Error details (checkpoint_error on fingerprint mismatch)
    """
    try:
        if from_scratch == (checkpoint is not None):
            raise UsageError("transfer-eval needs exactly one of --checkpoint or --from-scratch")
        check_config(config)
        seeds = sorted(seeds if seeds else config.seeds)
        if len(set(seeds)) != len(seeds):
            raise ValueError(f"Downstream seeds must be distinct, got {seeds}")

        if from_scratch:
            pretext = None
            condition = SCRATCH_CONDITION if not linear_probe else f"{SCRATCH_CONDITION}-linear"
            run_dir = Path(config.output_dir) / condition
            config.write_resolved(run_dir, condition=condition)
            if (run_dir / METRICS_NAME).exists():
                record = RunRecord.load(run_dir / METRICS_NAME, condition=condition)
            else:
                record = RunRecord(run_id=config.run_id(-1), seed=-1, condition=condition)
        else:
            checkpoint = Path(checkpoint)
            if not checkpoint.is_file():
                raise UsageError(f"Checkpoint {checkpoint} does not exist")
            pretext, extra = load_checkpoint(checkpoint, expected_encoder=config.encoder_spec())
            run_dir, record = _checkpoint_record(checkpoint, extra, linear_probe)
            condition = record.condition
            if linear_probe:
                config.write_resolved(run_dir, seeds=[record.seed], condition=condition)

        _, train, test = load_experiment_splits(config)
        results = _run_seeds(pretext, config, train, test, seeds, linear_probe, parallel)

        # Re-running a seed replaces its earlier result
        record.downstream = [d for d in record.downstream if d.downstream_seed not in set(seeds)]
        for result in results:
            record.add_downstream(result)
        record.downstream.sort(key=lambda d: d.downstream_seed)
        metrics_path = record.save(run_dir / METRICS_NAME)

        return create_success_response(
            data={
                "run_dir": str(run_dir),
                "condition": condition,
                "results": [
                    {"downstream_seed": r.downstream_seed, "final_downstream_test_acc": r.accuracy}
                    for r in results
                ],
            },
            metadata={"linear_probe": linear_probe, "parallel": parallel, "metrics": str(metrics_path)},
        )

    except Exception as e:
        return error_response_for(e, "transfer-eval")

"""
Helpers shared by the command modules: dataset and task construction from an
ExperimentConfig, run directory layout, and mapping exceptions to error
envelopes.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ssl_curriculum.config import ExperimentConfig
from ssl_curriculum.data import DatasetSource, DatasetSplit, load_splits
from ssl_curriculum.permutations import generate_permutation_set, load_set, save_set
from ssl_curriculum.tasks import JigsawTask, PatchPairTask, PretextTask, TaskKind
from ssl_curriculum.utils import (
    CheckpointMismatchError,
    DatasetFormatError,
    PermutationFileError,
    SchemaMismatchError,
    TrainingError,
    UsageError,
    create_error_response,
)

logger = logging.getLogger(__name__)


CHECKPOINT_NAME = "checkpoint.bin"
METRICS_NAME = "metrics.jsonl"
PERMUTATIONS_NAME = "permutations.txt"
PLOTS_DIR = "plots"


def error_response_for(e: Exception, command: str) -> Dict[str, Any]:
    """Envelope for an exception raised while running a command."""
    if isinstance(e, UsageError):
        error_type = "usage_error"
    elif isinstance(e, (PermutationFileError, DatasetFormatError, SchemaMismatchError)):
        error_type = "format_error"
    elif isinstance(e, CheckpointMismatchError):
        error_type = "checkpoint_error"
    elif isinstance(e, ValueError):
        error_type = "validation_error"
    else:
        error_type = "runtime_error"

    details = None
    if isinstance(e, TrainingError) and e.level_index is not None:
        details = {"level_index": e.level_index}

    log = logger.warning if error_type in ("usage_error", "validation_error") else logger.error
    log(f"{command} failed ({error_type}): {e}")
    return create_error_response(error_type, f"{command}: {e}", details)


def check_config(config: ExperimentConfig) -> None:
    """
    Raises:
        ValueError: If the config has validation errors
        UsageError: If a file-based dataset has no path
    """
    errors = config.get_validation_errors()
    if errors:
        raise ValueError("; ".join(errors))
    if config.dataset != DatasetSource.synthetic.value and not config.dataset_path:
        raise UsageError(f"dataset '{config.dataset}' requires --dataset-path")


def load_experiment_splits(config: ExperimentConfig) -> Tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """(unlabeled, labeled_train, labeled_test) for the configured source."""
    unlabeled, train, test = load_splits(
        config.dataset,
        config.dataset_path,
        image_size=config.image_size,
        synthetic=config.synthetic_spec(),
    )
    return unlabeled.head(config.max_unlabeled), train, test


def build_task(config: ExperimentConfig, run_dir: Optional[Path] = None) -> PretextTask:
    """
    Pretext task builder for the config; a jigsaw permutation set is loaded or
    generated and, when run_dir is given, copied into it.
    """
    transform = config.transform_config()
    if config.task_kind == TaskKind.patch_pair.value:
        return PatchPairTask(transform=transform, output_size=config.input_size)

    if config.perm_file:
        perm_set = load_set(config.perm_file)
        if perm_set.n_patches != config.grid_n ** 2:
            raise UsageError(
                f"Permutation file covers {perm_set.n_patches} patches but grid_n={config.grid_n} needs {config.grid_n ** 2}"
            )
    else:
        perm_set = generate_permutation_set(config.grid_n ** 2, config.set_size, config.perm_seed)
    if run_dir is not None:
        save_set(perm_set, Path(run_dir) / PERMUTATIONS_NAME)
    return JigsawTask(perm_set=perm_set, transform=transform, output_size=config.input_size)


def run_directory(config: ExperimentConfig, seed: int) -> Path:
    """<output_dir>/<condition>/seed-<seed>"""
    return Path(config.output_dir) / config.condition_label() / f"seed-{seed}"

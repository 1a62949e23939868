"""
Jitter curricula: difficulty ordering, schedule construction and staged pretext training.

A curriculum is an ordered list of jitter levels, easiest first. The same
model is trained through every level; each level regenerates its samples on
the fly from the per-sample random streams.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from ssl_curriculum.data import DatasetSplit
from ssl_curriculum.model import EncoderSpec, SharedEncoderClassifier, build_model
from ssl_curriculum.tasks import PretextTask
from ssl_curriculum.training import (
    RunRecord,
    TrainerConfig,
    evaluate_accuracy,
    make_optimizer,
    pretext_sources,
    train,
)
from ssl_curriculum.transforms import JitterLevel
from ssl_curriculum.utils import TrainingError, validate_fraction, validate_positive_int

logger = logging.getLogger(__name__)


DifficultyFn = Callable[[JitterLevel], float]

EMPIRICAL_TIE_BREAK = 1e-6


def retention_difficulty(level: JitterLevel) -> float:
    """Default difficulty: the fraction of the patch side removed by jitter."""
    return 1.0 - level.retention


@dataclass(frozen=True)
class CurriculumSchedule:
    """
    Jitter levels ordered by strictly increasing difficulty.

    Attributes:
        levels: Jitter levels, easiest first
        difficulties: f-value of each level
    """
    levels: Tuple[JitterLevel, ...]
    difficulties: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "difficulties", tuple(float(f) for f in self.difficulties))
        if not self.levels:
            raise ValueError("A curriculum schedule needs at least one level")
        if len(self.levels) != len(self.difficulties):
            raise ValueError("Each level needs exactly one difficulty value")
        if len({level.retention for level in self.levels}) != len(self.levels):
            raise ValueError("Schedule levels must be distinct")
        for easier, harder in zip(self.difficulties, self.difficulties[1:]):
            if not easier < harder:
                raise ValueError(f"Difficulties must be strictly increasing, got {easier} then {harder}")

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    @property
    def retentions(self) -> List[float]:
        return [level.retention for level in self.levels]

    @classmethod
    def from_levels(cls, levels: Iterable[JitterLevel], difficulty: DifficultyFn = retention_difficulty) -> "CurriculumSchedule":
        """Sort levels by ascending difficulty."""
        scored = sorted(((difficulty(level), level) for level in levels), key=lambda pair: pair[0])
        return cls(levels=tuple(level for _, level in scored), difficulties=tuple(f for f, _ in scored))


def build_schedule(
    start_retention: float,
    end_retention: float,
    step: float,
    difficulty: DifficultyFn = retention_difficulty,
) -> CurriculumSchedule:
    """
    Levels start, start - step, ... down to the last value >= end, plus end itself.

    Args:
        start_retention: Easiest retention (usually 1.0)
        end_retention: Hardest retention
        step: Retention decrement between consecutive levels
        difficulty: Function ordering the levels

    Returns:
        CurriculumSchedule: Levels sorted by ascending difficulty

    Raises:
        ValueError: If 0 < end <= start <= 1 and 0 < step < 1 do not hold
    """
    start_retention = validate_fraction(start_retention, "start_retention")
    end_retention = validate_fraction(end_retention, "end_retention")
    step = validate_fraction(step, "step")
    if end_retention > start_retention:
        raise ValueError(f"end_retention {end_retention} must not exceed start_retention {start_retention}")
    if step >= 1.0:
        raise ValueError("step must be less than 1")

    retentions: List[float] = []
    index = 0
    while True:
        value = round(start_retention - index * step, 10)
        if value < end_retention - 1e-12:
            break
        retentions.append(value)
        index += 1
    if abs(retentions[-1] - end_retention) > 1e-9:
        retentions.append(round(end_retention, 10))

    schedule = CurriculumSchedule.from_levels((JitterLevel(r) for r in retentions), difficulty)
    logger.info(f"Built curriculum schedule with {len(schedule)} levels: {schedule.retentions}")
    return schedule


class EmpiricalDifficulty:
    """
    Difficulty measured as 1 - pretext accuracy after a short probe at each level.

    Stronger jitter is added as a tiny secondary term so that levels with equal
    probe accuracy still order strictly.
    """

    def __init__(self, accuracies: Dict[float, float]):
        if not accuracies:
            raise ValueError("EmpiricalDifficulty needs at least one measured level")
        self.accuracies = {round(float(r), 10): float(a) for r, a in accuracies.items()}

    def __call__(self, level: JitterLevel) -> float:
        key = round(level.retention, 10)
        if key not in self.accuracies:
            raise ValueError(f"No probe accuracy was measured for retention {level.retention}")
        return (1.0 - self.accuracies[key]) + EMPIRICAL_TIE_BREAK * (1.0 - level.retention)


def measure_empirical_difficulty(
    dataset: DatasetSplit,
    task_builder: PretextTask,
    levels: Sequence[JitterLevel],
    trainer_cfg: TrainerConfig,
    probe_epochs: int,
    eval_split: Optional[DatasetSplit] = None,
    encoder_spec: Optional[EncoderSpec] = None,
) -> EmpiricalDifficulty:
    """
    Probe every level with a freshly initialized model and record its pretext accuracy.

    The probe accuracy is measured on eval_split when given, otherwise on the
    training images with evaluation-salted streams.
    """
    validate_positive_int(probe_epochs, "probe_epochs")
    encoder_spec = encoder_spec or EncoderSpec()
    cfg = replace(trainer_cfg, epochs=probe_epochs)

    accuracies: Dict[float, float] = {}
    for level in levels:
        task = task_builder.with_jitter(level)
        model = build_model(encoder_spec, task.n_inputs, task.label_space_size, trainer_cfg.seed)
        train_source, eval_dataset = pretext_sources(task, dataset, eval_split or dataset, trainer_cfg.seed)
        train(model, train_source, cfg, level_retention=level.retention)
        accuracies[level.retention] = evaluate_accuracy(model, eval_dataset)
        logger.info(f"Probe at retention {level.retention}: pretext accuracy {accuracies[level.retention]:.4f}")

    return EmpiricalDifficulty(accuracies)


def _initial_state(
    state: Optional[SharedEncoderClassifier],
    task: PretextTask,
    encoder_spec: Optional[EncoderSpec],
    seed: int,
) -> SharedEncoderClassifier:
    if state is not None:
        return state
    return build_model(encoder_spec or EncoderSpec(), task.n_inputs, task.label_space_size, seed)


def pretrain_fixed(
    dataset: DatasetSplit,
    task_builder: PretextTask,
    level: JitterLevel,
    trainer_cfg: TrainerConfig,
    eval_split: Optional[DatasetSplit] = None,
    state: Optional[SharedEncoderClassifier] = None,
    encoder_spec: Optional[EncoderSpec] = None,
    record: Optional[RunRecord] = None,
) -> Tuple[SharedEncoderClassifier, RunRecord]:
    """Pretext training at a single jitter level for trainer_cfg.epochs epochs."""
    task = task_builder.with_jitter(level)
    state = _initial_state(state, task, encoder_spec, trainer_cfg.seed)
    train_source, eval_dataset = pretext_sources(task, dataset, eval_split, trainer_cfg.seed)
    return train(state, train_source, trainer_cfg, eval_dataset, record=record, level_retention=level.retention)


def run_curriculum(
    dataset: DatasetSplit,
    task_builder: PretextTask,
    schedule: CurriculumSchedule,
    trainer_cfg: TrainerConfig,
    epochs_per_level: int,
    eval_split: Optional[DatasetSplit] = None,
    state: Optional[SharedEncoderClassifier] = None,
    encoder_spec: Optional[EncoderSpec] = None,
    record: Optional[RunRecord] = None,
) -> Tuple[SharedEncoderClassifier, RunRecord]:
    """
    Train one model through every schedule level, easiest first.

    The optimizer state and the model carry across levels; epochs are numbered
    globally so the record holds len(schedule) * epochs_per_level rows. All
    randomness derives from trainer_cfg.seed.

    Args:
        dataset: Unlabeled pretext images
        task_builder: Task whose jitter level is replaced per level
        schedule: Levels in ascending difficulty
        trainer_cfg: Trainer configuration (its epochs field is ignored)
        epochs_per_level: Epochs spent at each level
        eval_split: Images whose pretext accuracy is recorded after each epoch
        state: Model to continue training; a seeded one is built when omitted
        encoder_spec: Encoder description for a newly built model
        record: Record to append to

    Returns:
        Tuple of (trained model, run record)

    Raises:
        TrainingError: If training fails; carries the index of the failing level
    """
    validate_positive_int(epochs_per_level, "epochs_per_level")
    if len(schedule) == 0:
        raise ValueError("schedule must not be empty")

    level_cfg = replace(trainer_cfg, epochs=epochs_per_level)
    state = _initial_state(state, task_builder.with_jitter(schedule.levels[0]), encoder_spec, trainer_cfg.seed)
    optimizer = make_optimizer(state, level_cfg)

    for index, level in enumerate(schedule.levels):
        logger.info(
            f"Curriculum level {index + 1}/{len(schedule)}: retention {level.retention} "
            f"(f={schedule.difficulties[index]:.6f})"
        )
        task = task_builder.with_jitter(level)
        train_source, eval_dataset = pretext_sources(task, dataset, eval_split, trainer_cfg.seed)
        try:
            state, record = train(
                state,
                train_source,
                level_cfg,
                eval_dataset,
                record=record,
                level_retention=level.retention,
                epoch_offset=index * epochs_per_level,
                optimizer=optimizer,
            )
        except Exception as e:
            raise TrainingError(str(e), level_index=index) from e

    return state, record


def select_best_difficulty(candidates: Sequence[Tuple[Hashable, float]]) -> Hashable:
    """
    Pick the difficulty whose downstream accuracy is highest.

    Ties go to the lowest difficulty id, i.e. the easiest setting.

    Raises:
        ValueError: If candidates is empty or an accuracy lies outside [0, 1]
    """
    if not candidates:
        raise ValueError("candidates must not be empty")
    for difficulty_id, accuracy in candidates:
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError(f"Accuracy {accuracy} for {difficulty_id} is outside [0, 1]")

    best_accuracy = max(accuracy for _, accuracy in candidates)
    return min(difficulty_id for difficulty_id, accuracy in candidates if accuracy == best_accuracy)


def level_accuracy_trend(record: RunRecord) -> Tuple[float, float]:
    """
    Mean pretext test accuracy over the first level, and test accuracy at the
    first epoch of the last level.

    Raises:
        ValueError: If the record has no test accuracies
    """
    rows = [row for row in record.rows if row.test_acc is not None]
    if not rows:
        raise ValueError("Record has no pretext test accuracies")
    first_level = rows[0].level_retention
    last_level = rows[-1].level_retention
    first_accs = [row.test_acc for row in rows if row.level_retention == first_level]
    last_first = next(row.test_acc for row in rows if row.level_retention == last_level)
    return sum(first_accs) / len(first_accs), last_first

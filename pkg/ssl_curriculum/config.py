"""
Experiment configuration.

Values resolve in three layers: dataclass defaults, then a flat YAML file,
then command-line flags. The resolved mapping is written into every run
directory so runs can be reproduced and compared.
"""

import logging
from pathlib import Path
from dataclasses import dataclass, field, fields, asdict, replace
from typing import Any, Dict, List, Optional, Union

import yaml

from ssl_curriculum.curriculum import CurriculumSchedule, build_schedule
from ssl_curriculum.data import DatasetSource, SyntheticSpec
from ssl_curriculum.model import EncoderSpec
from ssl_curriculum.tasks import TRANSFORM_PRESETS, TaskKind, TransformConfig
from ssl_curriculum.training import TrainerConfig
from ssl_curriculum.transforms import JitterLevel
from ssl_curriculum.utils import fingerprint

logger = logging.getLogger(__name__)


RESOLVED_CONFIG_NAME = "config.resolved"
MODES = ("fixed", "curriculum")
DIFFICULTIES = ("retention", "empirical")

# Fields that only say where artifacts go; they do not change results
LOCATION_FIELDS = ("output_dir", "dataset_path", "perm_file")


def parse_seeds(value: Union[str, int, List[int], None]) -> Optional[List[int]]:
    """Accept 3, "1,2,3" or [1, 2, 3]."""
    if value is None:
        return None
    if isinstance(value, bool):
        raise ValueError("seeds must be integers")
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            return [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"seeds must be a comma-separated list of integers, got '{value}'")
    return [int(v) for v in value]


@dataclass
class ExperimentConfig:
    """Configuration for pretext pretraining and downstream evaluation."""

    # Pretext task
    task_kind: str = TaskKind.jigsaw.value
    grid_n: int = 2
    set_size: int = 12
    perm_seed: int = 0
    perm_file: Optional[str] = None

    # Transforms
    preset: Optional[str] = None
    normalize: bool = True
    greyscale_p: float = 0.3

    # Jitter: a fixed level or a curriculum
    mode: str = "fixed"
    retention: float = 0.95
    schedule_start: float = 1.0
    schedule_end: float = 0.80
    schedule_step: float = 0.05
    epochs_per_level: int = 2
    difficulty: str = "retention"
    probe_epochs: int = 2

    # Encoder
    input_size: int = 32
    embedding_dim: int = 128

    # Optimization
    learning_rate: float = 0.001
    batch_size: int = 64
    pretext_epochs: int = 10
    downstream_epochs: int = 10
    num_workers: int = 0

    # Data
    dataset: str = DatasetSource.synthetic.value
    dataset_path: Optional[str] = None
    image_size: int = 96
    max_unlabeled: Optional[int] = None
    synthetic_images: int = 2000
    synthetic_train: int = 500
    synthetic_test: int = 800
    synthetic_size: int = 64
    synthetic_seed: int = 0

    # Runs
    seeds: List[int] = field(default_factory=lambda: [0])
    output_dir: str = "runs"
    condition: Optional[str] = None

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> Dict[str, Any]:
        """
        Read a flat YAML mapping of overrides.

        Raises:
            ValueError: If the file is not a mapping or holds unknown keys
        """
        path = Path(path)
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a flat mapping")

        unknown = sorted(set(data) - set(cls.field_names()))
        if unknown:
            raise ValueError(f"{path}: unknown config key(s): {', '.join(unknown)}")
        nested = [key for key, value in data.items() if isinstance(value, dict)]
        if nested:
            raise ValueError(f"{path}: config keys must not be nested: {', '.join(nested)}")
        return data

    def merged(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        """Copy with every non-None override applied."""
        values = {key: value for key, value in overrides.items() if value is not None}
        unknown = sorted(set(values) - set(self.field_names()))
        if unknown:
            raise ValueError(f"Unknown config key(s): {', '.join(unknown)}")
        if "seeds" in values:
            values["seeds"] = parse_seeds(values["seeds"])
        return replace(self, **values)

    @classmethod
    def resolve(cls, config_path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """Defaults, then the config file (if any), then flag overrides."""
        config = cls()
        if config_path:
            config = config.merged(cls.from_file(config_path))
            logger.info(f"Loaded config file {config_path}")
        if overrides:
            config = config.merged(overrides)
        return config

    def is_valid(self) -> bool:
        """Check if configuration is valid."""
        return not self.get_validation_errors()

    def get_validation_errors(self) -> List[str]:
        """Get list of configuration validation errors."""
        errors = []
        if self.task_kind not in [k.value for k in TaskKind]:
            errors.append(f"task_kind must be one of: {', '.join(k.value for k in TaskKind)}")
        if self.mode not in MODES:
            errors.append(f"mode must be one of: {', '.join(MODES)}")
        if self.difficulty not in DIFFICULTIES:
            errors.append(f"difficulty must be one of: {', '.join(DIFFICULTIES)}")
        if self.preset is not None and self.preset not in TRANSFORM_PRESETS:
            errors.append(f"preset must be one of: {', '.join(TRANSFORM_PRESETS)}")
        if self.dataset not in [s.value for s in DatasetSource]:
            errors.append(f"dataset must be one of: {', '.join(s.value for s in DatasetSource)}")

        for name in ("retention", "schedule_start", "schedule_end", "schedule_step"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                errors.append(f"{name} must be in (0, 1]")
        if self.schedule_step >= 1.0:
            errors.append("schedule_step must be less than 1")
        if self.schedule_end > self.schedule_start:
            errors.append("schedule_end must not exceed schedule_start")
        if not 0.0 <= self.greyscale_p <= 1.0:
            errors.append("greyscale_p must be in [0, 1]")
        if self.learning_rate <= 0:
            errors.append("learning_rate must be greater than 0")

        positive = (
            "set_size", "epochs_per_level", "probe_epochs", "input_size", "embedding_dim",
            "batch_size", "pretext_epochs", "downstream_epochs", "image_size",
            "synthetic_images", "synthetic_train", "synthetic_test", "synthetic_size",
        )
        for name in positive:
            if getattr(self, name) < 1:
                errors.append(f"{name} must be at least 1")
        if self.grid_n < 2:
            errors.append("grid_n must be at least 2")
        if self.num_workers < 0:
            errors.append("num_workers must not be negative")
        if self.max_unlabeled is not None and self.max_unlabeled < 1:
            errors.append("max_unlabeled must be at least 1")
        if not self.seeds:
            errors.append("seeds must list at least one seed")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def run_id(self, seed: int) -> str:
        """Reproducible identifier of one seed of this experiment."""
        excluded = set(LOCATION_FIELDS) | {"seeds", "condition"}
        payload = {k: v for k, v in self.to_dict().items() if k not in excluded}
        return fingerprint([payload, int(seed)])

    def condition_label(self) -> str:
        """Human-readable experimental condition, e.g. fixed-0.95 or curriculum."""
        if self.condition:
            return self.condition
        if self.mode == "curriculum":
            label = "curriculum" if self.difficulty == "retention" else "curriculum-empirical"
        else:
            # Presets without jitter pin retention to 1.0 whatever --retention says
            label = f"fixed-{self.transform_config().jitter.retention:.2f}"
        if self.preset is not None and self.preset != "all":
            label = f"{label}-{self.preset}"
        return label

    def transform_config(self) -> TransformConfig:
        if self.preset is not None:
            return TransformConfig.preset(self.preset, retention=self.retention, greyscale_p=self.greyscale_p)
        return TransformConfig(jitter=JitterLevel(self.retention), greyscale_p=self.greyscale_p, normalize=self.normalize)

    def encoder_spec(self) -> EncoderSpec:
        return EncoderSpec(input_size=self.input_size, embedding_dim=self.embedding_dim)

    def pretext_trainer(self, seed: int) -> TrainerConfig:
        return TrainerConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.pretext_epochs,
            seed=seed,
            num_workers=self.num_workers,
        )

    def downstream_trainer(self, seed: int) -> TrainerConfig:
        return TrainerConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.downstream_epochs,
            seed=seed,
            num_workers=self.num_workers,
        )

    def schedule(self) -> CurriculumSchedule:
        return build_schedule(self.schedule_start, self.schedule_end, self.schedule_step)

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_images=self.synthetic_images,
            n_train=self.synthetic_train,
            n_test=self.synthetic_test,
            image_size=self.synthetic_size,
            seed=self.synthetic_seed,
        )

    def write_resolved(self, run_dir: Union[str, Path], **pinned: Any) -> Path:
        """
        Write the resolved config as YAML into a run directory.

        Args:
            run_dir: Run directory
            **pinned: Field values fixed for this run (e.g. seeds=[3], condition=...)
        """
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        data = replace(self, **pinned).to_dict() if pinned else self.to_dict()
        path = run_dir / RESOLVED_CONFIG_NAME
        path.write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")
        return path


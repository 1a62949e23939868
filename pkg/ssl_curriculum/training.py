"""
Optimization loop, accuracy evaluation and run records.

Pretext and downstream phases share one trainer: mini-batch cross-entropy
minimization with Adam. Pretext samples are regenerated every epoch from a
per-sample random stream, so a run is a deterministic function of its seed
when data loading is single-process.
"""

import json
import time
import logging
from pathlib import Path
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader, Dataset

from ssl_curriculum.data import DatasetSplit
from ssl_curriculum.model import SharedEncoderClassifier, transfer_encoder
from ssl_curriculum.tasks import PretextTask
from ssl_curriculum.transforms import RngStream, normalize_patch, Patch, resize_array
from ssl_curriculum.utils import SchemaMismatchError, validate_positive_int, validate_positive_number

logger = logging.getLogger(__name__)


TRAIN_SALT = 0
EVAL_SALT = 1
EVAL_BATCH_SIZE = 256

PRETEXT_FIELDS = (
    "run_id", "seed", "level_retention", "epoch", "pretext_train_acc", "pretext_test_acc", "wall_time_s",
)
DOWNSTREAM_FIELDS = (
    "run_id", "seed", "downstream_seed", "final_downstream_test_acc", "wall_time_s",
)


@dataclass(frozen=True)
class TrainerConfig:
    """
    Optimization hyperparameters for one phase.

    Attributes:
        learning_rate: Adam step size
        betas: Adam moment decay rates
        eps: Adam denominator epsilon
        batch_size: Mini-batch size
        epochs: Number of passes over the sample stream
        seed: Seed for batch order (and, by callers, model initialization)
        num_workers: DataLoader worker processes (0 = load in the training process)
    """
    learning_rate: float = 0.001
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    num_workers: int = 0

    def __post_init__(self):
        validate_positive_number(self.learning_rate, "learning_rate")
        validate_positive_int(self.batch_size, "batch_size")
        validate_positive_int(self.epochs, "epochs")
        validate_positive_int(self.num_workers, "num_workers", min_value=0)
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))


@dataclass
class EpochMetrics:
    """One epoch of a training phase."""
    epoch: int
    train_acc: float
    test_acc: Optional[float]
    wall_time_s: float
    level_retention: Optional[float] = None
    train_loss: Optional[float] = None


@dataclass
class DownstreamResult:
    """Final downstream test accuracy of one fine-tuning seed."""
    downstream_seed: int
    accuracy: float
    wall_time_s: float = 0.0


@dataclass
class RunRecord:
    """
    Per-epoch pretext metrics and final downstream accuracies of one run.

    Attributes:
        run_id: Reproducible run identifier
        seed: Pretext seed
        condition: Human-readable experimental condition (e.g. fixed-0.95, curriculum)
        rows: Pretext epochs, strictly increasing epoch numbers
        downstream: Downstream results, one per fine-tuning seed
    """
    run_id: str
    seed: int
    condition: str = ""
    rows: List[EpochMetrics] = field(default_factory=list)
    downstream: List[DownstreamResult] = field(default_factory=list)

    def add_epoch(self, row: EpochMetrics) -> None:
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise ValueError(f"Epoch {row.epoch} does not follow epoch {self.rows[-1].epoch}")
        for name in ("train_acc", "test_acc"):
            value = getattr(row, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} {value} is outside [0, 1]")
        self.rows.append(row)

    def add_downstream(self, result: DownstreamResult) -> None:
        if not 0.0 <= result.accuracy <= 1.0:
            raise ValueError(f"Downstream accuracy {result.accuracy} is outside [0, 1]")
        self.downstream.append(result)

    @property
    def final_downstream_accuracies(self) -> List[float]:
        return [r.accuracy for r in self.downstream]

    def metric_stream(self) -> List[Tuple]:
        """Metric values without wall-clock fields, for reproducibility comparisons."""
        return [(r.epoch, r.level_retention, r.train_acc, r.test_acc) for r in self.rows]

    def to_rows(self) -> List[Dict[str, Any]]:
        """JSON-lines objects: pretext epochs first, then downstream results."""
        rows = [
            {
                "run_id": self.run_id,
                "seed": self.seed,
                "level_retention": r.level_retention,
                "epoch": r.epoch,
                "pretext_train_acc": r.train_acc,
                "pretext_test_acc": r.test_acc,
                "wall_time_s": r.wall_time_s,
            }
            for r in self.rows
        ]
        rows.extend(
            {
                "run_id": self.run_id,
                "seed": self.seed,
                "downstream_seed": d.downstream_seed,
                "final_downstream_test_acc": d.accuracy,
                "wall_time_s": d.wall_time_s,
            }
            for d in self.downstream
        )
        return rows

    def save(self, path: Union[str, Path]) -> Path:
        """Write the record as JSON lines, replacing any existing file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            for row in self.to_rows():
                f.write(json.dumps(row) + "\n")
        return path

    @classmethod
    def load(cls, path: Union[str, Path], condition: str = "") -> "RunRecord":
        """
        Read a JSON-lines record.

        Raises:
            SchemaMismatchError: If a row matches neither the pretext nor the downstream schema
        """
        path = Path(path)
        record: Optional[RunRecord] = None
        for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            keys = set(row)
            if record is None:
                record = cls(run_id=row.get("run_id", ""), seed=int(row.get("seed", 0)), condition=condition)
            if keys == set(PRETEXT_FIELDS):
                record.add_epoch(EpochMetrics(
                    epoch=int(row["epoch"]),
                    train_acc=row["pretext_train_acc"],
                    test_acc=row["pretext_test_acc"],
                    wall_time_s=row["wall_time_s"],
                    level_retention=row["level_retention"],
                ))
            elif keys == set(DOWNSTREAM_FIELDS):
                record.add_downstream(DownstreamResult(
                    downstream_seed=int(row["downstream_seed"]),
                    accuracy=row["final_downstream_test_acc"],
                    wall_time_s=row["wall_time_s"],
                ))
            else:
                raise SchemaMismatchError(f"{path}:{line_number}: unrecognized metric fields {sorted(keys)}")
        if record is None:
            raise SchemaMismatchError(f"{path}: no metric rows")
        return record


class PretextDataset(Dataset):
    """
    Pretext samples for one epoch; item i is built from RngStream(seed, epoch, i, salt).
    """

    def __init__(self, split: DatasetSplit, task: PretextTask, seed: int, epoch: int, salt: int = TRAIN_SALT):
        self.split = split
        self.task = task
        self.seed = seed
        self.epoch = epoch
        self.salt = salt

    @property
    def label_space_size(self) -> int:
        return self.task.label_space_size

    def __len__(self) -> int:
        return len(self.split)

    def __getitem__(self, index: int):
        rng = RngStream(self.seed, self.epoch, index, self.salt)
        sample = self.task.build(self.split.image(index), rng)
        return sample.to_tensor(), sample.label


class LabeledImageDataset(Dataset):
    """
    Whole images resized to the encoder input size, as single-input samples (1, C, S, S).
    """

    def __init__(self, split: DatasetSplit, input_size: int, normalize: bool = True):
        if split.labels is None:
            raise ValueError("LabeledImageDataset requires a labeled split")
        arrays = []
        for pixels in split.pixels:
            resized = np.clip(resize_array(pixels, input_size), 0.0, 1.0)
            if normalize:
                resized = normalize_patch(Patch(resized)).pixels
            arrays.append(resized.transpose(2, 0, 1))
        self.inputs = torch.from_numpy(np.stack(arrays).astype(np.float32))[:, None]
        self.labels = torch.from_numpy(np.array(split.labels, dtype=np.int64))
        self.class_count = split.class_count

    @property
    def label_space_size(self) -> int:
        return self.class_count

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int):
        return self.inputs[index], int(self.labels[index])


SampleSource = Union[Dataset, Callable[[int], Dataset]]


def _dataset_for_epoch(source: SampleSource, epoch: int) -> Dataset:
    if isinstance(source, Dataset):
        return source
    return source(epoch)


def check_label_space(dataset: Dataset, out_classes: int) -> None:
    """
    Fail before any update if labels can exceed the head's classes.

    Raises:
        ValueError: If a label (or the declared label space) does not fit the head
    """
    labels = getattr(dataset, "labels", None)
    if labels is not None and len(labels):
        top = int(torch.as_tensor(labels).max())
        if top >= out_classes or int(torch.as_tensor(labels).min()) < 0:
            raise ValueError(f"Label {top} is out of range for a head with {out_classes} classes")
    space = getattr(dataset, "label_space_size", None)
    if space is not None and space > out_classes:
        raise ValueError(f"Label space of size {space} exceeds the head's {out_classes} classes")


def make_optimizer(model: SharedEncoderClassifier, cfg: TrainerConfig) -> torch.optim.Optimizer:
    """Adam over the model's trainable parameters."""
    params = [p for p in model.parameters() if p.requires_grad]
    return torch.optim.Adam(params, lr=cfg.learning_rate, betas=cfg.betas, eps=cfg.eps)


def _loader(dataset: Dataset, batch_size: int, shuffle: bool, num_workers: int, seed: Optional[int] = None) -> DataLoader:
    generator = None
    if shuffle:
        generator = torch.Generator()
        generator.manual_seed(seed or 0)
    return DataLoader(dataset, batch_size=batch_size, shuffle=shuffle, num_workers=num_workers, generator=generator)


def evaluate_accuracy(state: SharedEncoderClassifier, labeled_set: Dataset, batch_size: int = EVAL_BATCH_SIZE) -> float:
    """
    Fraction of samples whose argmax prediction equals the label.

    The model's training/eval mode is restored afterwards and no parameter changes.

    Raises:
        ValueError: If the set is empty
    """
    if len(labeled_set) == 0:
        raise ValueError("Cannot evaluate accuracy on an empty set")

    was_training = state.training
    state.eval()
    correct = 0
    total = 0
    try:
        with torch.no_grad():
            for inputs, labels in _loader(labeled_set, batch_size, shuffle=False, num_workers=0):
                predictions = state(inputs).argmax(dim=1)
                correct += int((predictions == labels).sum())
                total += len(labels)
    finally:
        state.train(was_training)
    return correct / total


def _epoch_seed(seed: int, epoch: int) -> int:
    return (int(seed) * 1_000_003 + int(epoch)) % (2 ** 63)


def train(
    state: SharedEncoderClassifier,
    samples: SampleSource,
    cfg: TrainerConfig,
    eval_split: Optional[SampleSource] = None,
    *,
    record: Optional[RunRecord] = None,
    level_retention: Optional[float] = None,
    epoch_offset: int = 0,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> Tuple[SharedEncoderClassifier, RunRecord]:
    """
    Minimize cross-entropy with Adam for cfg.epochs epochs.

    Args:
        state: Model to train in place
        samples: Dataset, or callable mapping a global epoch index to that epoch's dataset
        cfg: Trainer configuration
        eval_split: Dataset (or per-epoch callable) scored after every epoch
        record: Record to append to; a new one is created when omitted
        level_retention: Jitter level recorded with each epoch row
        epoch_offset: Global index of this call's first epoch (0-based)
        optimizer: Optimizer to continue with; a fresh Adam is created when omitted

    Returns:
        Tuple of (trained model, run record)

    Raises:
        ValueError: If labels do not fit the model's head (raised before any update)
    """
    if record is None:
        record = RunRecord(run_id=f"train-{cfg.seed}", seed=cfg.seed)
    if optimizer is None:
        optimizer = make_optimizer(state, cfg)

    check_label_space(_dataset_for_epoch(samples, epoch_offset), state.out_classes)

    for local_epoch in range(cfg.epochs):
        epoch = epoch_offset + local_epoch
        started = time.perf_counter()
        dataset = _dataset_for_epoch(samples, epoch)
        if local_epoch > 0:
            check_label_space(dataset, state.out_classes)

        state.train()
        correct = 0
        seen = 0
        losses: List[float] = []
        for inputs, labels in _loader(dataset, cfg.batch_size, True, cfg.num_workers, _epoch_seed(cfg.seed, epoch)):
            logits = state(inputs)
            loss = F.cross_entropy(logits, labels)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            correct += int((logits.detach().argmax(dim=1) == labels).sum())
            seen += len(labels)
            losses.append(float(loss.detach()))

        test_acc = None
        if eval_split is not None:
            test_acc = evaluate_accuracy(state, _dataset_for_epoch(eval_split, epoch))

        row = EpochMetrics(
            epoch=epoch + 1,
            train_acc=correct / max(seen, 1),
            test_acc=test_acc,
            wall_time_s=round(time.perf_counter() - started, 3),
            level_retention=level_retention,
            train_loss=float(np.mean(losses)) if losses else None,
        )
        record.add_epoch(row)
        logger.info(
            f"Epoch {row.epoch}: train_acc={row.train_acc:.4f}, test_acc="
            f"{'n/a' if test_acc is None else f'{test_acc:.4f}'}, retention={level_retention}, "
            f"{row.wall_time_s:.1f}s"
        )

    return state, record


def pretext_sources(
    task: PretextTask,
    train_split: DatasetSplit,
    eval_split: Optional[DatasetSplit],
    seed: int,
) -> Tuple[Callable[[int], Dataset], Optional[Dataset]]:
    """
    Per-epoch training datasets and a fixed evaluation dataset for one task configuration.

    Training samples use fresh streams every epoch; evaluation samples are
    drawn once from the evaluation salt.
    """
    def train_source(epoch: int) -> Dataset:
        return PretextDataset(train_split, task, seed, epoch, TRAIN_SALT)

    eval_dataset = PretextDataset(eval_split, task, seed, 0, EVAL_SALT) if eval_split is not None else None
    return train_source, eval_dataset


def fine_tune(
    pretext: SharedEncoderClassifier,
    train_split: DatasetSplit,
    test_split: DatasetSplit,
    cfg: TrainerConfig,
    downstream_seed: int,
    normalize: bool = True,
    freeze_encoder: bool = False,
) -> Tuple[SharedEncoderClassifier, DownstreamResult]:
    """
    Transfer the encoder under a fresh head and train it on the labeled split.

    Args:
        pretext: Model whose encoder is reused (left unchanged)
        train_split: Labeled training images
        test_split: Labeled test images
        cfg: Downstream trainer configuration; its seed is replaced by downstream_seed
        downstream_seed: Seed for the new head and the batch order
        normalize: Whiten each resized image before encoding
        freeze_encoder: Train the head only (linear probe)

    Returns:
        Tuple of (downstream model, final test accuracy result)
    """
    started = time.perf_counter()
    input_size = pretext.encoder_spec.input_size
    model = transfer_encoder(pretext, train_split.class_count, downstream_seed, freeze_encoder=freeze_encoder)
    train_set = LabeledImageDataset(train_split, input_size, normalize)
    test_set = LabeledImageDataset(test_split, input_size, normalize)

    downstream_cfg = replace(cfg, seed=downstream_seed)
    train(model, train_set, downstream_cfg, record=RunRecord(run_id=f"downstream-{downstream_seed}", seed=downstream_seed))
    accuracy = evaluate_accuracy(model, test_set)

    result = DownstreamResult(
        downstream_seed=downstream_seed,
        accuracy=accuracy,
        wall_time_s=round(time.perf_counter() - started, 3),
    )
    logger.info(f"Downstream seed {downstream_seed}: test accuracy {accuracy:.4f} (frozen encoder: {freeze_encoder})")
    return model, result

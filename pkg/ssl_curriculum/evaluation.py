"""
Representation probes and run comparison.

Nearest-neighbour retrieval is brute force over a frozen matrix; the same
code path serves encoder embeddings and flattened pixels so the two spaces
can be compared directly.
"""

import logging
from pathlib import Path
from dataclasses import dataclass
from typing import Any, Dict, Hashable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ssl_curriculum.data import DatasetSplit
from ssl_curriculum.model import SharedEncoderClassifier
from ssl_curriculum.training import EVAL_BATCH_SIZE, LabeledImageDataset, RunRecord
from ssl_curriculum.transforms import resize_array
from ssl_curriculum.utils import SchemaMismatchError, validate_positive_int

logger = logging.getLogger(__name__)


METRICS = ("euclidean", "cosine")
COMPARISON_COLUMNS = ["condition", "n_seeds", "mean_acc", "std_acc"]
COMPARISON_CSV = "comparison.csv"
BAR_CHART = "downstream_accuracy.png"
LINE_CHART = "pretext_accuracy.png"


@dataclass
class EmbeddingIndex:
    """
    Frozen N x D matrix with one identifier per row.

    Attributes:
        vectors: N x D matrix
        ids: N item identifiers (mutually comparable, used for tie-breaking)
        metric: euclidean or cosine (1 - cosine similarity)
    """
    vectors: np.ndarray
    ids: Sequence[Hashable]
    metric: str = "euclidean"

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise ValueError(f"vectors must be a non-empty N x D matrix, got shape {vectors.shape}")
        if len(self.ids) != vectors.shape[0]:
            raise ValueError(f"Expected {vectors.shape[0]} ids, got {len(self.ids)}")
        if self.metric not in METRICS:
            raise ValueError(f"Unknown metric '{self.metric}'. Must be one of: {', '.join(METRICS)}")
        vectors.setflags(write=False)
        self.vectors = vectors
        self.ids = list(self.ids)

        order = sorted(range(len(self.ids)), key=lambda i: self.ids[i])
        self._id_rank = np.empty(len(order), dtype=np.int64)
        self._id_rank[order] = np.arange(len(order))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def distances(self, query: np.ndarray) -> np.ndarray:
        """Distance from query to every indexed vector."""
        query = np.asarray(query, dtype=np.float64).reshape(-1)
        if query.shape[0] != self.dim:
            raise ValueError(f"Query dimension {query.shape[0]} does not match index dimension {self.dim}")
        if self.metric == "euclidean":
            return np.sqrt(((self.vectors - query) ** 2).sum(axis=1))
        norms = np.linalg.norm(self.vectors, axis=1) * np.linalg.norm(query)
        dots = self.vectors @ query
        similarity = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
        return 1.0 - similarity

    def ranked(self, distances: np.ndarray) -> np.ndarray:
        """Row indices sorted by (distance, id)."""
        return np.lexsort((self._id_rank, distances))


def nearest_neighbors(index: EmbeddingIndex, query: np.ndarray, k: int) -> List[Tuple[Hashable, float]]:
    """
    The k indexed items closest to query, ties broken by id.

    Raises:
        ValueError: If k is not in [1, N] or the query dimension differs
    """
    validate_positive_int(k, "k", max_value=len(index))
    distances = index.distances(query)
    order = index.ranked(distances)[:k]
    return [(index.ids[i], float(distances[i])) for i in order]


def neighbor_class_agreement(index: EmbeddingIndex, labels: Sequence[int], k: int) -> float:
    """
    Mean fraction of each item's k nearest neighbours (itself excluded) that share its label.

    Raises:
        ValueError: If k is not in [1, N - 1] or labels do not align with the index
    """
    n = len(index)
    if len(labels) != n:
        raise ValueError(f"Expected {n} labels, got {len(labels)}")
    validate_positive_int(k, "k")
    if k >= n:
        raise ValueError(f"k must be less than the number of indexed items ({n}), got {k}")

    labels = np.asarray(labels)
    fractions = np.empty(n, dtype=np.float64)
    for i in range(n):
        distances = index.distances(index.vectors[i]).copy()
        distances[i] = np.inf
        neighbours = [j for j in index.ranked(distances) if j != i][:k]
        fractions[i] = np.mean(labels[neighbours] == labels[i])
    return float(fractions.mean())


def embed_images(model: SharedEncoderClassifier, dataset: LabeledImageDataset, batch_size: int = EVAL_BATCH_SIZE) -> np.ndarray:
    """Encoder embeddings (N x D) of single-image inputs."""
    was_training = model.training
    model.eval()
    chunks = []
    try:
        with torch.no_grad():
            for start in range(0, len(dataset), batch_size):
                inputs = dataset.inputs[start:start + batch_size, 0]
                chunks.append(model.embed(inputs).numpy())
    finally:
        model.train(was_training)
    return np.concatenate(chunks).astype(np.float64)


def build_embedding_index(model: SharedEncoderClassifier, dataset: LabeledImageDataset, metric: str = "euclidean") -> EmbeddingIndex:
    """Index a labeled dataset by its encoder embeddings; ids are row positions."""
    return EmbeddingIndex(embed_images(model, dataset), list(range(len(dataset))), metric)


def build_pixel_index(split: DatasetSplit, input_size: int, metric: str = "euclidean") -> EmbeddingIndex:
    """Index a split by its flattened images resized to input_size; ids are row positions."""
    vectors = np.stack([resize_array(pixels, input_size).reshape(-1) for pixels in split.pixels])
    return EmbeddingIndex(vectors, list(range(len(split))), metric)


def _sample_std(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def _check_schema(records: Sequence[RunRecord]) -> None:
    for record in records:
        if not record.downstream:
            raise SchemaMismatchError(
                f"Run {record.run_id} ({record.condition or 'unlabeled'}) has no downstream accuracy rows"
            )


def comparison_table(records: Sequence[RunRecord]) -> pd.DataFrame:
    """
    Per-condition mean and sample standard deviation of final downstream accuracy.

    Raises:
        ValueError: If records is empty
        SchemaMismatchError: If a record has no downstream results
    """
    if not records:
        raise ValueError("compare_runs needs at least one run record")
    _check_schema(records)

    by_condition: Dict[str, List[float]] = {}
    for record in records:
        by_condition.setdefault(record.condition or record.run_id, []).extend(record.final_downstream_accuracies)

    rows = []
    for condition in sorted(by_condition):
        values = sorted(by_condition[condition])
        rows.append({
            "condition": condition,
            "n_seeds": len(values),
            "mean_acc": float(np.mean(values)),
            "std_acc": _sample_std(values),
        })
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)


def pretext_curves(records: Sequence[RunRecord]) -> pd.DataFrame:
    """Mean pretext test accuracy per (condition, epoch) over all records that carry it."""
    rows = [
        {"condition": record.condition or record.run_id, "epoch": row.epoch, "pretext_test_acc": row.test_acc}
        for record in records
        for row in record.rows
        if row.test_acc is not None
    ]
    if not rows:
        return pd.DataFrame(columns=["condition", "epoch", "pretext_test_acc"])
    frame = pd.DataFrame(rows).sort_values(["condition", "epoch", "pretext_test_acc"], kind="mergesort")
    return frame.groupby(["condition", "epoch"], as_index=False)["pretext_test_acc"].mean().sort_values(["condition", "epoch"])


def _plot_bars(table: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(table)), 4.0))
    ax.bar(table["condition"], table["mean_acc"], yerr=table["std_acc"], capsize=4, color="tab:blue")
    ax.set_ylabel("Downstream test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Downstream accuracy by pretraining condition")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_pretext_curves(records: Sequence[RunRecord], path: Union[str, Path]) -> Path:
    """Line chart of pretext test accuracy against epoch, one line per condition."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    curves = pretext_curves(records)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for condition, group in curves.groupby("condition"):
        ax.plot(group["epoch"], group["pretext_test_acc"], marker="o", markersize=3, label=str(condition))
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Pretext test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    if not curves.empty:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def compare_runs(records: Sequence[RunRecord], out_dir: Union[str, Path]) -> Dict[str, Any]:
    """
    Write the comparison CSV, a bar chart of downstream accuracy and a
    pretext accuracy-vs-epoch line chart.

    Runs that were pretrained but never transfer-evaluated are left out of the
    table and the bar chart with a warning; their pretext curves are still drawn.
    Output is independent of the order of records.

    Returns:
        Dict with the table (list of row dicts), the skipped run ids and the written file paths

    Raises:
        SchemaMismatchError: If no record has downstream results
    """
    out_dir = Path(out_dir)
    evaluated = [record for record in records if record.downstream]
    skipped = sorted(record.run_id for record in records if not record.downstream)
    if evaluated and skipped:
        logger.warning(f"Leaving {len(skipped)} runs without downstream results out of the table: {skipped}")
    table = comparison_table(evaluated or records)

    plots_dir = out_dir / "plots"
    plots_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / COMPARISON_CSV
    table.to_csv(csv_path, index=False)
    _plot_bars(table, plots_dir / BAR_CHART)
    plot_pretext_curves(records, plots_dir / LINE_CHART)

    logger.info(f"Compared {len(evaluated)} runs over {len(table)} conditions; table written to {csv_path}")
    return {
        "table": table.to_dict(orient="records"),
        "skipped": skipped,
        "csv": str(csv_path),
        "plots": [str(plots_dir / BAR_CHART), str(plots_dir / LINE_CHART)],
    }


"""
Nearest-neighbour probe command.

Compares retrieval in encoder-embedding space against raw pixel space on the
labeled test split and writes neighbors.json next to the checkpoint.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from ssl_curriculum.commands.common import check_config, error_response_for, load_experiment_splits
from ssl_curriculum.config import ExperimentConfig
from ssl_curriculum.evaluation import (
    build_embedding_index,
    build_pixel_index,
    neighbor_class_agreement,
    nearest_neighbors,
)
from ssl_curriculum.model import load_checkpoint
from ssl_curriculum.training import LabeledImageDataset
from ssl_curriculum.utils import UsageError, create_success_response, logged_command, validate_positive_int

logger = logging.getLogger(__name__)


NEIGHBORS_NAME = "neighbors.json"


@logged_command
def neighbors(
    config: ExperimentConfig,
    checkpoint: Union[str, Path],
    k: int = 5,
    metric: str = "euclidean",
    n_queries: int = 10,
) -> Dict[str, Any]:
    """
    Score k-NN class agreement in embedding and pixel space.

    Args:
        config: Resolved experiment config (dataset, encoder, normalization)
        checkpoint: Pretrained checkpoint
        k: Neighbours per item
        metric: euclidean or cosine
        n_queries: Number of test items whose retrieval ids are written out

    Returns:
        Dict containing:
        - success (bool): Whether the probe finished
        - data (dict): agreement per space and the output path
        - error (dict, optional): Error details
    """
    try:
        validate_positive_int(k, "k")
        validate_positive_int(n_queries, "n_queries")
        check_config(config)
        checkpoint = Path(checkpoint)
        if not checkpoint.is_file():
            raise UsageError(f"Checkpoint {checkpoint} does not exist")

        model, _ = load_checkpoint(checkpoint, expected_encoder=config.encoder_spec())
        _, _, test = load_experiment_splits(config)
        dataset = LabeledImageDataset(test, config.input_size, config.transform_config().normalize)

        spaces = {
            "embedding": build_embedding_index(model, dataset, metric),
            "pixel": build_pixel_index(test, config.input_size, metric),
        }
        agreement = {name: neighbor_class_agreement(index, test.labels, k) for name, index in spaces.items()}

        queries = []
        for item in range(min(n_queries, len(test))):
            entry = {"id": item, "label": int(test.labels[item])}
            for name, index in spaces.items():
                # k + 1 because the query itself is indexed
                hits = nearest_neighbors(index, index.vectors[item], min(k + 1, len(index)))
                entry[name] = [int(i) for i, _ in hits if i != item][:k]
            queries.append(entry)

        out_path = checkpoint.parent / NEIGHBORS_NAME
        out_path.write_text(
            json.dumps({"k": k, "metric": metric, "agreement": agreement, "queries": queries}, indent=2),
            encoding="utf-8",
        )
        logger.info(
            f"Neighbour agreement (k={k}, {metric}): embedding {agreement['embedding']:.4f}, "
            f"pixel {agreement['pixel']:.4f}"
        )
        return create_success_response(data={"path": str(out_path), "k": k, "metric": metric, "agreement": agreement})

    except Exception as e:
        return error_response_for(e, "neighbors")

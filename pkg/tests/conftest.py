"""
Shared fixtures: a tiny synthetic dataset and a small encoder so that
training tests finish in seconds on CPU.
"""

from pathlib import Path

import numpy as np
import pytest
import torch

from ssl_curriculum import commands
from ssl_curriculum.commands.common import CHECKPOINT_NAME
from ssl_curriculum.config import ExperimentConfig
from ssl_curriculum.data import SyntheticSpec, generate_synthetic
from ssl_curriculum.model import EncoderSpec
from ssl_curriculum.permutations import generate_permutation_set
from ssl_curriculum.tasks import JigsawTask, TransformConfig


TINY_STAGES = ((8, 3, 2), (16, 3, 2))


@pytest.fixture(autouse=True)
def single_thread_torch():
    """Keep numeric results independent of the host's thread count."""
    previous = torch.get_num_threads()
    torch.set_num_threads(1)
    yield
    torch.set_num_threads(previous)


@pytest.fixture
def tiny_spec() -> EncoderSpec:
    return EncoderSpec(input_size=16, channels=3, stages=TINY_STAGES, embedding_dim=16)


@pytest.fixture(scope="session")
def tiny_splits():
    """(unlabeled, labeled_train, labeled_test) with 4 classes of 24px images."""
    spec = SyntheticSpec(n_images=40, n_train=24, n_test=24, image_size=24, class_count=4, seed=0)
    return generate_synthetic(spec)


@pytest.fixture
def jigsaw_task() -> JigsawTask:
    perm_set = generate_permutation_set(4, 6, seed=0)
    return JigsawTask(perm_set=perm_set, transform=TransformConfig(), output_size=16)


@pytest.fixture
def random_images():
    """Factory of random H x W x C images in [0, 1]."""
    def make(count, height=12, width=12, channels=3, seed=0):
        rng = np.random.default_rng(seed)
        return [rng.random((height, width, channels)).astype(np.float32) for _ in range(count)]
    return make


@pytest.fixture
def tiny_config(tmp_path):
    """Experiment config small enough for end-to-end command runs."""
    return ExperimentConfig(
        grid_n=2,
        set_size=4,
        input_size=16,
        embedding_dim=16,
        batch_size=8,
        pretext_epochs=2,
        downstream_epochs=1,
        synthetic_images=16,
        synthetic_train=20,
        synthetic_test=20,
        synthetic_size=24,
        output_dir=str(tmp_path / "runs"),
    )


@pytest.fixture
def pretrained_checkpoint(tiny_config):
    """Run fixed-mode pretraining once and return the checkpoint path."""
    result = commands.pretrain(tiny_config)
    assert result["success"], result
    return Path(result["data"]["runs"][0]["run_dir"]) / CHECKPOINT_NAME

"""
Shared-weight encoder, classification heads and checkpoints.

Every input patch of a sample goes through the same convolutional encoder;
the k embeddings are concatenated in input order and classified by a single
fully connected layer. Transfer keeps the encoder and swaps the head.
"""

import copy
import logging
from pathlib import Path
from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from ssl_curriculum.transforms import Patch
from ssl_curriculum.utils import CheckpointMismatchError, fingerprint, validate_positive_int

logger = logging.getLogger(__name__)


CHECKPOINT_FORMAT = "ssl-curriculum/1"

DEFAULT_STAGES: Tuple[Tuple[int, int, int], ...] = (
    (32, 3, 2),
    (64, 3, 2),
    (128, 3, 2),
    (128, 3, 2),
)


@dataclass(frozen=True)
class EncoderSpec:
    """
    Convolutional patch encoder description.

    Attributes:
        input_size: Patch side length in pixels
        channels: Input channels
        stages: (filters, kernel, stride) per conv stage, followed by global average pooling
        embedding_dim: Output embedding size D
    """
    input_size: int = 32
    channels: int = 3
    stages: Tuple[Tuple[int, int, int], ...] = DEFAULT_STAGES
    embedding_dim: int = 128

    def __post_init__(self):
        stages = tuple(tuple(int(v) for v in stage) for stage in self.stages)
        object.__setattr__(self, "stages", stages)
        validate_positive_int(self.input_size, "input_size")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if not stages:
            raise ValueError("EncoderSpec needs at least one conv stage")
        for stage in stages:
            if len(stage) != 3 or min(stage) < 1:
                raise ValueError(f"Each stage must be positive (filters, kernel, stride), got {stage}")
        validate_positive_int(self.embedding_dim, "embedding_dim")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["stages"] = [list(stage) for stage in self.stages]
        return data

    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())


@dataclass(frozen=True)
class HeadSpec:
    """
    Fully connected head over k concatenated embeddings.

    Attributes:
        in_dim: k * D
        out_classes: Number of output classes
    """
    in_dim: int
    out_classes: int

    def __post_init__(self):
        validate_positive_int(self.in_dim, "in_dim")
        validate_positive_int(self.out_classes, "out_classes", min_value=2)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class PatchEncoder(nn.Module):
    """Conv stages with ReLU, global average pooling and an optional projection to D."""

    def __init__(self, spec: EncoderSpec):
        super().__init__()
        layers = []
        in_channels = spec.channels
        for filters, kernel, stride in spec.stages:
            layers.append(nn.Conv2d(in_channels, filters, kernel_size=kernel, stride=stride, padding=kernel // 2))
            layers.append(nn.ReLU())
            in_channels = filters
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.projection = nn.Linear(in_channels, spec.embedding_dim) if in_channels != spec.embedding_dim else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.pool(self.features(x)).flatten(1)
        if self.projection is not None:
            z = self.projection(z)
        return z


class SharedEncoderClassifier(nn.Module):
    """
    Model state: one encoder shared by k input slots plus a linear head.

    Input shape is (B, k, C, S, S); output is (B, out_classes) logits.
    """

    def __init__(self, encoder_spec: EncoderSpec, n_inputs: int, out_classes: int):
        super().__init__()
        validate_positive_int(n_inputs, "n_inputs")
        self.encoder_spec = encoder_spec
        self.n_inputs = n_inputs
        self.head_spec = HeadSpec(in_dim=n_inputs * encoder_spec.embedding_dim, out_classes=out_classes)
        self.encoder = PatchEncoder(encoder_spec)
        self.head = nn.Linear(self.head_spec.in_dim, out_classes)

    @property
    def out_classes(self) -> int:
        return self.head_spec.out_classes

    def check_input(self, x: torch.Tensor) -> None:
        spec = self.encoder_spec
        expected = (self.n_inputs, spec.channels, spec.input_size, spec.input_size)
        if x.dim() != 5 or tuple(x.shape[1:]) != expected:
            raise ValueError(f"Expected input of shape (B, {', '.join(map(str, expected))}), got {tuple(x.shape)}")

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        """Encode a (B, C, S, S) batch of single patches into (B, D) embeddings."""
        return self.encoder(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        batch, k = x.shape[:2]
        embeddings = self.encoder(x.reshape(batch * k, *x.shape[2:]))
        concatenated = embeddings.reshape(batch, k * embeddings.shape[1])
        return self.head(concatenated)

    def fingerprints(self) -> Dict[str, str]:
        return {
            "encoder": self.encoder_spec.fingerprint(),
            "head": fingerprint(self.head_spec.to_dict()),
        }


def build_model(encoder_spec: EncoderSpec, n_inputs: int, out_classes: int, seed: int) -> SharedEncoderClassifier:
    """Create a freshly initialized model with parameters determined by seed."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = SharedEncoderClassifier(encoder_spec, n_inputs, out_classes)
    logger.info(
        f"Built model: k={n_inputs}, out_classes={out_classes}, "
        f"encoder={encoder_spec.fingerprint()}, seed={seed}"
    )
    return model


def forward_pretext(state: SharedEncoderClassifier, patches: Sequence[Patch]) -> torch.Tensor:
    """
    Logits for one sample of k patches.

    Args:
        state: Model whose head consumes len(patches) embeddings
        patches: Patches in input order, each input_size x input_size x channels

    Returns:
        torch.Tensor: Logits of length out_classes

    Raises:
        ValueError: On a patch count or patch shape mismatch
    """
    if len(patches) != state.n_inputs:
        raise ValueError(f"Model consumes {state.n_inputs} patches, got {len(patches)}")
    stacked = np.stack([np.asarray(p.pixels, dtype=np.float32).transpose(2, 0, 1) for p in patches])
    return state(torch.from_numpy(stacked)[None])[0]


def transfer_encoder(
    pretext: SharedEncoderClassifier,
    n_classes: int,
    seed: int,
    freeze_encoder: bool = False,
) -> SharedEncoderClassifier:
    """
    Copy the encoder under a freshly seeded single-input head.

    Args:
        pretext: Source model (trained or freshly initialized)
        n_classes: Downstream class count
        seed: Seed for the new head's initialization
        freeze_encoder: Mark encoder parameters non-trainable (linear probe)

    Returns:
        SharedEncoderClassifier: Model with k = 1 and value-identical encoder parameters

    Raises:
        ValueError: If n_classes < 2
    """
    validate_positive_int(n_classes, "n_classes", min_value=2)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = SharedEncoderClassifier(pretext.encoder_spec, n_inputs=1, out_classes=n_classes)
    model.encoder = copy.deepcopy(pretext.encoder)
    for parameter in model.encoder.parameters():
        parameter.requires_grad_(not freeze_encoder)

    logger.info(f"Transferred encoder to a {n_classes}-class head (seed={seed}, frozen={freeze_encoder})")
    return model


def save_checkpoint(model: SharedEncoderClassifier, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Persist spec fingerprints and parameters.

    Args:
        model: Model to save
        path: Destination file
        extra: Optional JSON-like metadata stored alongside
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "encoder_spec": model.encoder_spec.to_dict(),
        "head_spec": model.head_spec.to_dict(),
        "n_inputs": model.n_inputs,
        "fingerprints": model.fingerprints(),
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)
    logger.info(f"Saved checkpoint to {path} (encoder {payload['fingerprints']['encoder']})")
    return path


def load_checkpoint(
    path: Union[str, Path],
    expected_encoder: Optional[EncoderSpec] = None,
) -> Tuple[SharedEncoderClassifier, Dict[str, Any]]:
    """
    Load a checkpoint, rejecting fingerprint mismatches.

    Args:
        path: Checkpoint file
        expected_encoder: Encoder spec the caller requires; None skips that check

    Returns:
        Tuple of (model, extra metadata)

    Raises:
        CheckpointMismatchError: If the stored fingerprint disagrees with the stored
            spec or with expected_encoder
    """
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointMismatchError(f"{path} is not an {CHECKPOINT_FORMAT} checkpoint")

    encoder_spec = EncoderSpec(**payload["encoder_spec"])
    stored = payload["fingerprints"]["encoder"]
    if encoder_spec.fingerprint() != stored:
        raise CheckpointMismatchError(f"Checkpoint encoder fingerprint {stored} does not match its stored spec")
    if expected_encoder is not None and expected_encoder.fingerprint() != stored:
        raise CheckpointMismatchError(
            f"Checkpoint encoder fingerprint {stored} does not match the configured encoder "
            f"{expected_encoder.fingerprint()}"
        )

    head_spec = HeadSpec(**payload["head_spec"])
    model = SharedEncoderClassifier(encoder_spec, payload["n_inputs"], head_spec.out_classes)
    if fingerprint(model.head_spec.to_dict()) != payload["fingerprints"]["head"]:
        raise CheckpointMismatchError("Checkpoint head fingerprint does not match its stored spec")
    model.load_state_dict(payload["state_dict"])
    logger.info(f"Loaded checkpoint {path} (encoder {stored})")
    return model, payload.get("extra", {})

"""
Pretext-task sample assembly.

Two tasks are provided:

- jigsaw: the image is cut into a square grid, the patches are shuffled by a
  permutation drawn from a PermutationSet and the label is that
  permutation's index;
- patch_pair: a 3x3 grid is cut, one non-center patch is paired with the
  center patch and the label is the neighbour's position (0..7, row-major
  over the eight non-center cells).

The transform pipeline for both is greyscale (whole image) -> extract ->
jitter (per patch) -> normalize (per patch).
"""

import math
import logging
from enum import Enum
from dataclasses import dataclass, field, replace
from typing import List, Tuple, Union

import numpy as np
import torch

from ssl_curriculum.permutations import PermutationSet
from ssl_curriculum.transforms import (
    Image,
    JitterLevel,
    Patch,
    RngStream,
    extract_patches,
    jitter_patch,
    normalize_patch,
    random_greyscale,
)
from ssl_curriculum.utils import validate_probability

logger = logging.getLogger(__name__)


PATCH_PAIR_GRID = 3
PATCH_PAIR_CENTER = (1, 1)
NON_CENTER_CELLS: Tuple[Tuple[int, int], ...] = tuple(
    (r, c) for r in range(PATCH_PAIR_GRID) for c in range(PATCH_PAIR_GRID) if (r, c) != PATCH_PAIR_CENTER
)


class TaskKind(str, Enum):
    """Available pretext tasks."""
    jigsaw = "jigsaw"
    patch_pair = "patch_pair"


TRANSFORM_PRESETS = ("none", "normalize", "greyscale", "jitter", "all")


@dataclass(frozen=True)
class TransformConfig:
    """
    The three shortcut-suppressing transforms applied to every pretext sample.

    Attributes:
        jitter: Random-crop retention level
        greyscale_p: Probability of greyscaling the whole image
        normalize: Whether each patch is whitened independently
    """
    jitter: JitterLevel = field(default_factory=lambda: JitterLevel(1.0))
    greyscale_p: float = 0.0
    normalize: bool = True

    def __post_init__(self):
        if not isinstance(self.jitter, JitterLevel):
            object.__setattr__(self, "jitter", JitterLevel(self.jitter))
        object.__setattr__(self, "greyscale_p", validate_probability(self.greyscale_p, "greyscale_p"))

    def with_jitter(self, level: Union[JitterLevel, float]) -> "TransformConfig":
        """Copy of this config at another jitter level."""
        if not isinstance(level, JitterLevel):
            level = JitterLevel(level)
        return replace(self, jitter=level)

    @classmethod
    def preset(cls, name: str, retention: float = 0.95, greyscale_p: float = 0.3) -> "TransformConfig":
        """
        Build one of the single-transform ablation conditions.

        Args:
            name: One of none, normalize, greyscale, jitter, all
            retention: Retention used by the jitter and all presets
            greyscale_p: Probability used by the greyscale and all presets

        Raises:
            ValueError: If the preset name is unknown
        """
        presets = {
            "none": dict(jitter=JitterLevel(1.0), greyscale_p=0.0, normalize=False),
            "normalize": dict(jitter=JitterLevel(1.0), greyscale_p=0.0, normalize=True),
            "greyscale": dict(jitter=JitterLevel(1.0), greyscale_p=greyscale_p, normalize=False),
            "jitter": dict(jitter=JitterLevel(retention), greyscale_p=0.0, normalize=False),
            "all": dict(jitter=JitterLevel(retention), greyscale_p=greyscale_p, normalize=True),
        }
        if name not in presets:
            raise ValueError(f"Unknown transform preset '{name}'. Must be one of: {', '.join(TRANSFORM_PRESETS)}")
        return cls(**presets[name])


@dataclass
class PretextSample:
    """
    Transformed patch tuple plus its integer class label.

    Attributes:
        patches: Patches in network input order
        label: Class index in [0, label_space_size)
        task_kind: Which pretext task produced the sample
    """
    patches: Tuple[Patch, ...]
    label: int
    task_kind: TaskKind

    def __post_init__(self):
        self.patches = tuple(self.patches)
        shapes = {p.pixels.shape for p in self.patches}
        if len(shapes) != 1:
            raise ValueError(f"All patches of a sample must share dimensions, got {sorted(shapes)}")

    def to_tensor(self) -> torch.Tensor:
        """Stack patches into a (k, C, S, S) float32 tensor."""
        stacked = np.stack([p.pixels.transpose(2, 0, 1) for p in self.patches]).astype(np.float32)
        return torch.from_numpy(stacked)


def _transform_patches(patches: List[Patch], cfg: TransformConfig, rng: RngStream, output_size) -> List[Patch]:
    out = []
    for patch in patches:
        patch = jitter_patch(patch, cfg.jitter, rng, output_size)
        if cfg.normalize:
            patch = normalize_patch(patch)
        out.append(patch)
    return out


def grid_size_for(perm_set: PermutationSet) -> int:
    """Grid side implied by a permutation set (n_patches must be a perfect square)."""
    grid_n = math.isqrt(perm_set.n_patches)
    if grid_n * grid_n != perm_set.n_patches or grid_n < 2:
        raise ValueError(f"n_patches {perm_set.n_patches} is not a square grid of side >= 2")
    return grid_n


def make_jigsaw_sample(
    image: Image,
    perm_set: PermutationSet,
    cfg: TransformConfig,
    rng: RngStream,
    output_size: Union[int, None] = None,
) -> PretextSample:
    """
    Build one jigsaw sample.

    Output position i holds the original patch perm.order[i], where perm is
    perm_set[label].

    Args:
        image: Source image
        perm_set: Label space; its n_patches fixes the grid (4 -> 2x2, 9 -> 3x3)
        cfg: Transform configuration
        rng: Per-sample random stream
        output_size: Network input side for jittered patches (default: patch side)

    Returns:
        PretextSample: Shuffled patches and the permutation label
    """
    if len(perm_set) == 0:
        raise ValueError("perm_set must not be empty")
    grid_n = grid_size_for(perm_set)

    # Draw order: greyscale coin, permutation label, then crop offsets per patch
    image = random_greyscale(image, cfg.greyscale_p, rng)
    label = rng.integers(0, len(perm_set))
    patches = _transform_patches(extract_patches(image, grid_n), cfg, rng, output_size)

    shuffled = perm_set[label].apply(patches)
    return PretextSample(patches=tuple(shuffled), label=label, task_kind=TaskKind.jigsaw)


def make_patch_pair_sample(
    image: Image,
    cfg: TransformConfig,
    rng: RngStream,
    output_size: Union[int, None] = None,
) -> PretextSample:
    """
    Build one relative-position sample: (neighbour patch, center patch).

    The label is the neighbour's index among the eight non-center cells in
    row-major order: (0,0) -> 0 ... (2,2) -> 7.
    """
    image = random_greyscale(image, cfg.greyscale_p, rng)
    label = rng.integers(0, len(NON_CENTER_CELLS))
    grid = extract_patches(image, PATCH_PAIR_GRID)
    by_cell = {p.source_cell: p for p in grid}

    pair = [by_cell[NON_CENTER_CELLS[label]], by_cell[PATCH_PAIR_CENTER]]
    pair = _transform_patches(pair, cfg, rng, output_size)
    return PretextSample(patches=tuple(pair), label=label, task_kind=TaskKind.patch_pair)


@dataclass(frozen=True)
class JigsawTask:
    """Sample builder for the jigsaw task at a fixed transform configuration."""
    perm_set: PermutationSet
    transform: TransformConfig
    output_size: int

    kind = TaskKind.jigsaw

    @property
    def label_space_size(self) -> int:
        return len(self.perm_set)

    @property
    def n_inputs(self) -> int:
        return self.perm_set.n_patches

    def with_jitter(self, level: Union[JitterLevel, float]) -> "JigsawTask":
        return replace(self, transform=self.transform.with_jitter(level))

    def build(self, image: Image, rng: RngStream) -> PretextSample:
        return make_jigsaw_sample(image, self.perm_set, self.transform, rng, self.output_size)


@dataclass(frozen=True)
class PatchPairTask:
    """Sample builder for the relative-position task at a fixed transform configuration."""
    transform: TransformConfig
    output_size: int

    kind = TaskKind.patch_pair

    @property
    def label_space_size(self) -> int:
        return len(NON_CENTER_CELLS)

    @property
    def n_inputs(self) -> int:
        return 2

    def with_jitter(self, level: Union[JitterLevel, float]) -> "PatchPairTask":
        return replace(self, transform=self.transform.with_jitter(level))

    def build(self, image: Image, rng: RngStream) -> PretextSample:
        return make_patch_pair_sample(image, self.transform, rng, self.output_size)


PretextTask = Union[JigsawTask, PatchPairTask]

"""
Patch extraction and shortcut-suppressing transforms.

This module provides the image and patch value types, the per-sample random
stream, grid patch extraction, random-crop jitter, per-patch normalization
and random greyscaling. Every random choice is drawn from an RngStream so
that a sample is a pure function of its inputs and its seed material.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ssl_curriculum.utils import validate_fraction, validate_positive_int, validate_probability

logger = logging.getLogger(__name__)


NORMALIZE_EPSILON = 1e-8


class RngStream:
    """
    Deterministic random stream derived from (global_seed, epoch, sample_index).

    The optional salt separates independent purposes (training samples,
    evaluation samples, ...) that share the same indices. Two streams built
    from identical seed material produce identical draws.
    """

    def __init__(self, global_seed: int, epoch: int = 0, sample_index: int = 0, salt: int = 0):
        self.seed_material = (int(salt), int(global_seed), int(epoch), int(sample_index))
        self._generator = np.random.default_rng(np.random.SeedSequence(list(self.seed_material)))

    def __repr__(self) -> str:
        salt, seed, epoch, index = self.seed_material
        return f"RngStream(global_seed={seed}, epoch={epoch}, sample_index={index}, salt={salt})"

    def random(self) -> float:
        """Uniform draw in [0, 1)."""
        return float(self._generator.random())

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)."""
        return int(self._generator.integers(low, high))

    def coin(self, p: float) -> bool:
        """Bernoulli(p) draw; always consumes exactly one uniform."""
        return self.random() < p


@dataclass
class Image:
    """
    An H x W x C array of intensities in [0, 1], C in {1, 3}.
    """
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim == 2:
            pixels = pixels[:, :, None]
        if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
            raise ValueError(f"Image must be H x W x C with C in {{1, 3}}, got shape {pixels.shape}")
        if pixels.size == 0:
            raise ValueError("Image must not be empty")
        pixels = pixels.astype(np.float32, copy=False)
        if float(pixels.min()) < 0.0 or float(pixels.max()) > 1.0:
            raise ValueError("Image intensities must lie within [0, 1]")
        self.pixels = pixels

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass
class Patch:
    """
    An h x w x C block of an image; values are unbounded once normalized.

    Attributes:
        pixels: Patch intensities
        source_cell: (row, col) of the grid cell the patch was cut from
    """
    pixels: np.ndarray
    source_cell: Tuple[int, int] = field(default=(0, 0))

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim == 2:
            pixels = pixels[:, :, None]
        if pixels.ndim != 3 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError(f"Patch must be h x w x C with h, w >= 1, got shape {pixels.shape}")
        self.pixels = pixels
        self.source_cell = (int(self.source_cell[0]), int(self.source_cell[1]))

    @property
    def side(self) -> int:
        return min(self.pixels.shape[0], self.pixels.shape[1])

    def replace(self, pixels: np.ndarray) -> "Patch":
        return Patch(pixels=pixels, source_cell=self.source_cell)


@dataclass(frozen=True)
class JitterLevel:
    """
    Fraction of the patch side kept by random cropping; 1.0 means no jitter.
    """
    retention: float

    def __post_init__(self):
        object.__setattr__(self, "retention", validate_fraction(self.retention, "retention"))

    def crop_side(self, side: int) -> int:
        """Side length of the random crop for a patch of the given side."""
        # The small offset keeps products like 0.8 * 40 from flooring to 31
        return int(math.floor(self.retention * side + 1e-9))


def center_crop_to_grid(image: Image, grid_n: int) -> np.ndarray:
    """Center-crop pixels to the largest height and width divisible by grid_n."""
    height = image.height - image.height % grid_n
    width = image.width - image.width % grid_n
    top = (image.height - height) // 2
    left = (image.width - width) // 2
    return image.pixels[top:top + height, left:left + width]


def extract_patches(image: Image, grid_n: int) -> List[Patch]:
    """
    Cut an image into a grid_n x grid_n grid of equal patches, row-major.

    The image is first center-cropped to the largest size divisible by grid_n.

    Args:
        image: Source image
        grid_n: Number of cells per side (>= 2)

    Returns:
        List[Patch]: grid_n**2 patches in row-major order with source_cell set

    Raises:
        ValueError: If grid_n < 2 or grid_n > min(H, W)
    """
    validate_positive_int(grid_n, "grid_n", min_value=2)
    if grid_n > min(image.height, image.width):
        raise ValueError(f"grid_n {grid_n} is larger than the image ({image.height}x{image.width})")

    pixels = center_crop_to_grid(image, grid_n)
    cell_h = pixels.shape[0] // grid_n
    cell_w = pixels.shape[1] // grid_n

    patches = []
    for row in range(grid_n):
        for col in range(grid_n):
            block = pixels[row * cell_h:(row + 1) * cell_h, col * cell_w:(col + 1) * cell_w]
            patches.append(Patch(pixels=block.copy(), source_cell=(row, col)))
    return patches


def reassemble_patches(patches: Sequence[Patch], grid_n: int) -> np.ndarray:
    """
    Inverse of extract_patches: place patches back on the grid by source_cell.

    Raises:
        ValueError: If the patches do not tile a grid_n x grid_n grid exactly once
    """
    if len(patches) != grid_n * grid_n:
        raise ValueError(f"Expected {grid_n * grid_n} patches, got {len(patches)}")
    cells = {p.source_cell: p.pixels for p in patches}
    if len(cells) != len(patches):
        raise ValueError("Patches must come from distinct grid cells")
    rows = [np.concatenate([cells[(r, c)] for c in range(grid_n)], axis=1) for r in range(grid_n)]
    return np.concatenate(rows, axis=0)


def resize_array(pixels: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of an h x w x C array to size x size."""
    if pixels.shape[0] == size and pixels.shape[1] == size:
        return pixels
    tensor = torch.from_numpy(np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float32))[None]
    downsizing = size < min(pixels.shape[0], pixels.shape[1])
    resized = F.interpolate(tensor, size=(size, size), mode="bilinear", align_corners=False, antialias=downsizing)
    return resized[0].numpy().transpose(1, 2, 0)


def jitter_patch(patch: Patch, level: JitterLevel, rng: RngStream, output_size: Optional[int] = None) -> Patch:
    """
    Randomly crop a square of side floor(retention * side) and resize it to output_size.

    Args:
        patch: Patch to jitter
        level: Jitter level (retention fraction)
        rng: Stream supplying the crop offsets
        output_size: Network input side; defaults to the patch side

    Returns:
        Patch: output_size x output_size patch with the same source_cell

    Raises:
        ValueError: If the crop side would be smaller than one pixel
    """
    side = patch.side
    crop = level.crop_side(side)
    if crop < 1:
        raise ValueError(f"retention {level.retention} leaves an empty crop for patch side {side}")
    if output_size is None:
        output_size = side

    height, width = patch.pixels.shape[:2]
    top = rng.integers(0, height - crop + 1)
    left = rng.integers(0, width - crop + 1)
    cropped = patch.pixels[top:top + crop, left:left + crop]
    return patch.replace(resize_array(cropped, output_size))


def normalize_patch(patch: Patch) -> Patch:
    """
    Whiten a patch to mean 0 and standard deviation 1 over all pixels and channels.

    Constant patches map to all zeros.
    """
    if patch.pixels.size == 0:
        raise ValueError("Cannot normalize an empty patch")
    values = patch.pixels.astype(np.float64)
    mean = values.mean()
    std = values.std()
    normalized = (values - mean) / (std + NORMALIZE_EPSILON)
    return patch.replace(normalized.astype(np.float32))


def greyscale_pixels(pixels: np.ndarray) -> np.ndarray:
    """Replace each pixel's channels by their equal-weight mean."""
    grey = pixels.mean(axis=2, keepdims=True, dtype=np.float64).astype(pixels.dtype)
    return np.repeat(grey, pixels.shape[2], axis=2)


def random_greyscale(image: Image, p: float, rng: RngStream) -> Image:
    """
    With probability p, replace each pixel's channels by their mean.

    The coin is always drawn so that downstream draws do not depend on p.
    """
    p = validate_probability(p, "greyscale_p")
    if not rng.coin(p):
        return image
    return Image(pixels=greyscale_pixels(image.pixels))


def resize_image(image: Image, size: int) -> Image:
    """Bilinear resize of a whole image to size x size, clipped to [0, 1]."""
    return Image(pixels=np.clip(resize_array(image.pixels, size), 0.0, 1.0))

"""
Dataset ingestion.

This module provides the in-memory split type and three sources:

- STL-10 binary archives (3x96x96 uint8 records, channel-major, column-major
  pixels per channel; label files hold 1-based bytes);
- folders of class-named sub-directories of PNG/JPEG images;
- a deterministic synthetic dataset of colored-quadrant discs over smooth
  textured backgrounds, small enough for CPU experiments.

All sources emit float32 intensities in [0, 1].
"""

import logging
import itertools
from enum import Enum
from pathlib import Path
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from ssl_curriculum.transforms import Image, resize_array
from ssl_curriculum.utils import DatasetFormatError, validate_positive_int

logger = logging.getLogger(__name__)


STL10_SIDE = 96
STL10_CHANNELS = 3
STL10_RECORD_BYTES = STL10_CHANNELS * STL10_SIDE * STL10_SIDE
STL10_CLASSES = 10

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}


class SplitKind(str, Enum):
    """Dataset split categories."""
    unlabeled = "unlabeled"
    labeled_train = "labeled_train"
    labeled_test = "labeled_test"


@dataclass
class DatasetSplit:
    """
    Immutable collection of images with optional labels.

    Attributes:
        kind: Split category
        pixels: (N, H, W, C) float32 array in [0, 1]
        labels: (N,) int64 labels for labeled splits, None for unlabeled
        class_count: Number of classes of the source dataset
        skipped: Number of unreadable items skipped at load time
    """
    kind: SplitKind
    pixels: np.ndarray
    labels: Optional[np.ndarray]
    class_count: int
    skipped: int = 0

    def __post_init__(self):
        self.kind = SplitKind(self.kind)
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 4 or self.pixels.shape[3] not in (1, 3):
            raise ValueError(f"pixels must be (N, H, W, C) with C in {{1, 3}}, got {self.pixels.shape}")
        if self.pixels.size and (float(self.pixels.min()) < 0.0 or float(self.pixels.max()) > 1.0):
            raise ValueError("Dataset intensities must lie within [0, 1]")

        if self.kind == SplitKind.unlabeled:
            if self.labels is not None:
                raise ValueError("Unlabeled split must not carry labels")
        else:
            if self.labels is None:
                raise ValueError(f"{self.kind.value} split requires labels")
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.pixels),):
                raise ValueError(f"Expected {len(self.pixels)} labels, got shape {self.labels.shape}")
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
                raise ValueError(f"Labels must lie in [0, {self.class_count})")
        self.pixels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.pixels)

    def image(self, index: int) -> Image:
        return Image(pixels=self.pixels[index])

    @property
    def image_size(self) -> Tuple[int, int]:
        return self.pixels.shape[1], self.pixels.shape[2]

    @property
    def channels(self) -> int:
        return self.pixels.shape[3]

    def head(self, count: Optional[int]) -> "DatasetSplit":
        """The first count items (all items when count is None or larger than the split)."""
        if count is None or count >= len(self):
            return self
        validate_positive_int(count, "count")
        labels = None if self.labels is None else self.labels[:count]
        return DatasetSplit(self.kind, self.pixels[:count], labels, self.class_count, self.skipped)

    def without_labels(self) -> "DatasetSplit":
        """Copy of this split as an unlabeled split."""
        return DatasetSplit(SplitKind.unlabeled, self.pixels, None, self.class_count, self.skipped)


def _default_labels_path(path: Path) -> Path:
    name = path.name
    if "_X" in name:
        return path.with_name(name.replace("_X", "_y"))
    return path.with_name(f"{path.stem}_labels{path.suffix}")


def load_stl10_binary(
    path: Union[str, Path],
    split: Union[SplitKind, str],
    labels_path: Optional[Union[str, Path]] = None,
) -> DatasetSplit:
    """
    Parse an STL-10 binary image file (and its label file for labeled splits).

    Args:
        path: Image file (e.g. train_X.bin, test_X.bin, unlabeled_X.bin)
        split: Split kind the file represents
        labels_path: Label file; defaults to the image file name with _X replaced by _y

    Returns:
        DatasetSplit: Images as (N, 96, 96, 3) float32 in [0, 1], 0-based labels

    Raises:
        DatasetFormatError: If the file size is not a positive multiple of 27,648
            bytes or a label byte lies outside [1, 10]
    """
    path = Path(path)
    split = SplitKind(split)
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % STL10_RECORD_BYTES != 0:
        raise DatasetFormatError(
            f"{path}: size {raw.size} bytes is not a positive multiple of the {STL10_RECORD_BYTES}-byte record"
        )

    count = raw.size // STL10_RECORD_BYTES
    # Records are channel-major with each channel stored column-major
    images = raw.reshape(count, STL10_CHANNELS, STL10_SIDE, STL10_SIDE).transpose(0, 3, 2, 1)
    pixels = images.astype(np.float32) / 255.0

    labels = None
    if split != SplitKind.unlabeled:
        labels_path = Path(labels_path) if labels_path else _default_labels_path(path)
        raw_labels = np.fromfile(labels_path, dtype=np.uint8)
        if raw_labels.size != count:
            raise DatasetFormatError(f"{labels_path}: expected {count} labels, found {raw_labels.size}")
        bad = np.flatnonzero((raw_labels < 1) | (raw_labels > STL10_CLASSES))
        if bad.size:
            raise DatasetFormatError(
                f"{labels_path}: label byte {int(raw_labels[bad[0]])} at index {int(bad[0])} is outside [1, {STL10_CLASSES}]"
            )
        labels = raw_labels.astype(np.int64) - 1

    logger.info(f"Loaded {count} STL-10 images from {path} ({split.value})")
    return DatasetSplit(kind=split, pixels=pixels, labels=labels, class_count=STL10_CLASSES)


def load_image_folder(
    path: Union[str, Path],
    image_size: int = STL10_SIDE,
    kind: Union[SplitKind, str] = SplitKind.labeled_train,
) -> DatasetSplit:
    """
    Load a directory of class-named sub-folders of images.

    Labels follow the sorted sub-folder names; images are converted to RGB and
    resized to image_size x image_size. Unreadable files are skipped with a
    warning and counted in the result's skipped field.

    Raises:
        ValueError: If the directory holds no readable images
    """
    root = Path(path)
    validate_positive_int(image_size, "image_size")
    if not root.is_dir():
        raise ValueError(f"Image folder {root} does not exist or is not a directory")

    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise ValueError(f"Image folder {root} contains no class sub-folders")

    arrays: List[np.ndarray] = []
    labels: List[int] = []
    skipped = 0
    for label, class_dir in enumerate(class_dirs):
        for file in sorted(class_dir.iterdir()):
            if not file.is_file() or file.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            try:
                with PILImage.open(file) as img:
                    rgb = img.convert("RGB").resize((image_size, image_size), PILImage.Resampling.BILINEAR)
                    arrays.append(np.asarray(rgb, dtype=np.float32) / 255.0)
                labels.append(label)
            except (UnidentifiedImageError, OSError) as e:
                skipped += 1
                logger.warning(f"Skipping unreadable image {file}: {e}")

    if not arrays:
        raise ValueError(f"Image folder {root} contains no readable images")
    if skipped:
        logger.warning(f"Skipped {skipped} unreadable image(s) under {root}")

    logger.info(f"Loaded {len(arrays)} images in {len(class_dirs)} classes from {root}")
    return DatasetSplit(
        kind=SplitKind(kind),
        pixels=np.stack(arrays),
        labels=np.asarray(labels, dtype=np.int64),
        class_count=len(class_dirs),
        skipped=skipped,
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Parameters of the synthetic quadrant dataset.

    Attributes:
        n_images: Unlabeled split size
        n_train: Labeled train split size
        n_test: Labeled test split size
        image_size: Square image side
        class_count: Number of quadrant color arrangements
        seed: Generation seed
    """
    n_images: int = 2000
    n_train: int = 500
    n_test: int = 800
    image_size: int = 64
    class_count: int = 10
    seed: int = 0

    def __post_init__(self):
        validate_positive_int(self.class_count, "class_count", min_value=2)
        validate_positive_int(self.n_images, "n_images", min_value=self.class_count)
        validate_positive_int(self.n_train, "n_train", min_value=1)
        validate_positive_int(self.n_test, "n_test", min_value=1)
        validate_positive_int(self.image_size, "image_size", min_value=8)
        validate_positive_int(self.seed, "seed", min_value=0)


PALETTE = np.asarray([
    [0.90, 0.15, 0.15],
    [0.15, 0.75, 0.20],
    [0.20, 0.30, 0.95],
    [0.95, 0.90, 0.20],
    [0.85, 0.25, 0.85],
    [0.15, 0.85, 0.85],
    [0.98, 0.60, 0.10],
    [0.55, 0.35, 0.15],
], dtype=np.float32)


def class_arrangements(class_count: int) -> List[Tuple[int, ...]]:
    """
    Fixed palette arrangements (TL, TR, BL, BR color indices), one per class.

    The smallest palette prefix with enough ordered 4-tuples is used and the
    tuples are picked at evenly spaced positions of their lexicographic order.
    """
    for palette_size in range(4, len(PALETTE) + 1):
        candidates = list(itertools.permutations(range(palette_size), 4))
        if len(candidates) >= class_count:
            step = len(candidates) / class_count
            return [candidates[int(i * step)] for i in range(class_count)]
    raise ValueError(f"class_count {class_count} exceeds the available color arrangements")


def _render(label: int, arrangements: List[Tuple[int, ...]], size: int, rng: np.random.Generator) -> np.ndarray:
    """Render one disc split into four colored quadrants over a smooth texture."""
    coarse = rng.uniform(0.2, 0.8, size=(6, 6, 3)).astype(np.float32)
    background = resize_array(coarse, size)
    background = background + rng.normal(0.0, 0.03, size=background.shape).astype(np.float32)

    cy = size / 2 + rng.uniform(-size / 16, size / 16)
    cx = size / 2 + rng.uniform(-size / 16, size / 16)
    radius = rng.uniform(0.30, 0.42) * size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) + 0.5
    inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    quadrant = (yy >= cy).astype(np.int64) * 2 + (xx >= cx).astype(np.int64)

    colors = PALETTE[list(arrangements[label])] * rng.uniform(0.85, 1.0)
    image = np.where(inside[:, :, None], colors[quadrant], background)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def _render_split(
    count: int,
    spec: SyntheticSpec,
    arrangements: List[Tuple[int, ...]],
    seed_seq: np.random.SeedSequence,
) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    labels = rng.permutation(np.arange(count) % spec.class_count)
    pixels = np.stack([_render(int(label), arrangements, spec.image_size, rng) for label in labels])
    return pixels, labels.astype(np.int64)


def generate_synthetic(spec: SyntheticSpec) -> Tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """
    Generate the (unlabeled, labeled_train, labeled_test) synthetic splits.

    Each image holds a disc whose four quadrants carry the class's color
    arrangement; the quarter-disc in each grid cell makes patch positions
    recoverable, while the shared background texture offers the cross-patch
    continuity cue that jitter destroys. Classes are balanced to within one
    image and each split draws from its own RNG substream.
    """
    arrangements = class_arrangements(spec.class_count)
    unlabeled_seq, train_seq, test_seq = np.random.SeedSequence(spec.seed).spawn(3)

    unlabeled_pixels, _ = _render_split(spec.n_images, spec, arrangements, unlabeled_seq)
    train_pixels, train_labels = _render_split(spec.n_train, spec, arrangements, train_seq)
    test_pixels, test_labels = _render_split(spec.n_test, spec, arrangements, test_seq)

    logger.info(
        f"Generated synthetic dataset: {spec.n_images} unlabeled, {spec.n_train} train, "
        f"{spec.n_test} test, {spec.image_size}px, {spec.class_count} classes, seed={spec.seed}"
    )
    return (
        DatasetSplit(SplitKind.unlabeled, unlabeled_pixels, None, spec.class_count),
        DatasetSplit(SplitKind.labeled_train, train_pixels, train_labels, spec.class_count),
        DatasetSplit(SplitKind.labeled_test, test_pixels, test_labels, spec.class_count),
    )


class DatasetSource(str, Enum):
    """Where experiment images come from."""
    synthetic = "synthetic"
    stl10 = "stl10"
    folder = "folder"


def load_splits(
    source: Union[DatasetSource, str],
    path: Optional[Union[str, Path]] = None,
    image_size: int = STL10_SIDE,
    synthetic: Optional[SyntheticSpec] = None,
) -> Tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    """
    Load the (unlabeled, labeled_train, labeled_test) splits of a source.

    Layouts:
        stl10: path holds unlabeled_X.bin, train_X.bin/train_y.bin and test_X.bin/test_y.bin
        folder: path holds train/ and test/ class folders, plus an optional
            unlabeled/ folder of sub-folders whose names are ignored (the train
            images are used without labels otherwise)
        synthetic: generated from the synthetic spec; path is ignored

    Raises:
        ValueError: If a file-based source is given no path
    """
    source = DatasetSource(source)
    if source == DatasetSource.synthetic:
        return generate_synthetic(synthetic or SyntheticSpec())

    if path is None:
        raise ValueError(f"Dataset source '{source.value}' requires a dataset path")
    root = Path(path)

    if source == DatasetSource.stl10:
        return (
            load_stl10_binary(root / "unlabeled_X.bin", SplitKind.unlabeled),
            load_stl10_binary(root / "train_X.bin", SplitKind.labeled_train),
            load_stl10_binary(root / "test_X.bin", SplitKind.labeled_test),
        )

    train = load_image_folder(root / "train", image_size, SplitKind.labeled_train)
    test = load_image_folder(root / "test", image_size, SplitKind.labeled_test)
    unlabeled_dir = root / "unlabeled"
    if unlabeled_dir.is_dir():
        unlabeled = load_image_folder(unlabeled_dir, image_size, SplitKind.labeled_train).without_labels()
    else:
        unlabeled = train.without_labels()
    return unlabeled, train, test

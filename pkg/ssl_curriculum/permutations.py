"""
Permutation label space for the jigsaw task.

This module provides the permutation value types, the Hamming distance
between permutations, greedy max-min selection of permutation subsets and
the plain-text permutation-set file format:

    n_patches set_size
    i0 i1 ... i(n-1)        (one permutation per line, label = line order)
"""

import math
import logging
import itertools
from pathlib import Path
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple, Union

import numpy as np

from ssl_curriculum.utils import PermutationFileError, validate_positive_int

logger = logging.getLogger(__name__)


CANDIDATE_POOL_SIZE = 10_000


@dataclass(frozen=True)
class Permutation:
    """
    A bijection on {0, ..., n-1}.

    Applied to a sequence, output position i holds input element order[i].
    """
    order: Tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"Permutation order must be a bijection on 0..{len(order) - 1}, got {order}")

    def __len__(self) -> int:
        return len(self.order)

    def apply(self, items: Sequence) -> list:
        """Shuffle items so that output position i holds items[order[i]]."""
        if len(items) != len(self.order):
            raise ValueError(f"Cannot apply permutation of length {len(self.order)} to {len(items)} items")
        return [items[i] for i in self.order]

    def inverse(self) -> "Permutation":
        """Return the permutation that undoes apply()."""
        inv = [0] * len(self.order)
        for position, source in enumerate(self.order):
            inv[source] = position
        return Permutation(tuple(inv))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))


def hamming_distance(p: Permutation, q: Permutation) -> int:
    """
    Count positions at which two permutations differ.

    Args:
        p: First permutation
        q: Second permutation

    Returns:
        int: Number of positions i with p.order[i] != q.order[i]

    Raises:
        ValueError: If the permutations have different lengths
    """
    if len(p) != len(q):
        raise ValueError(f"Permutation lengths differ: {len(p)} != {len(q)}")
    return sum(a != b for a, b in zip(p.order, q.order))


def _min_pairwise(perms: Sequence[Permutation]) -> int:
    if len(perms) < 2:
        # No pairs: report the largest distance possible at this length
        return len(perms[0]) if perms else 0
    matrix = np.asarray([p.order for p in perms], dtype=np.int16)
    best = len(perms[0])
    for i in range(len(perms) - 1):
        distances = (matrix[i + 1:] != matrix[i]).sum(axis=1)
        best = min(best, int(distances.min()))
    return best


@dataclass(frozen=True)
class PermutationSet:
    """
    Ordered set of distinct permutations; the index of a permutation is its class label.

    Attributes:
        perms: Permutations in label order
        n_patches: Length shared by every permutation
        min_pairwise_distance: Minimum Hamming distance over all unordered pairs
    """
    perms: Tuple[Permutation, ...]
    n_patches: int
    min_pairwise_distance: int = field(default=-1, compare=False)

    def __post_init__(self):
        perms = tuple(p if isinstance(p, Permutation) else Permutation(tuple(p)) for p in self.perms)
        object.__setattr__(self, "perms", perms)

        if not perms:
            raise ValueError("PermutationSet must contain at least one permutation")
        for p in perms:
            if len(p) != self.n_patches:
                raise ValueError(f"Permutation {p.order} has length {len(p)}, expected {self.n_patches}")
        if len(set(perms)) != len(perms):
            raise ValueError("PermutationSet permutations must be distinct")

        object.__setattr__(self, "min_pairwise_distance", _min_pairwise(perms))

    def __len__(self) -> int:
        return len(self.perms)

    def __getitem__(self, label: int) -> Permutation:
        return self.perms[label]

    def __iter__(self):
        return iter(self.perms)

    def label_of(self, perm: Permutation) -> int:
        """Return the class label of a permutation in this set."""
        return self.perms.index(perm)

    def as_array(self) -> np.ndarray:
        """Return the permutations as an (N, n_patches) integer array."""
        return np.asarray([p.order for p in self.perms], dtype=np.int64)

    def pairwise_distances(self) -> np.ndarray:
        """Return the full (N, N) Hamming distance matrix."""
        matrix = self.as_array()
        return (matrix[:, None, :] != matrix[None, :, :]).sum(axis=2)


def _candidate_pool(n_patches: int, rng: np.random.Generator) -> np.ndarray:
    """All of S_n when it fits in the pool size, otherwise a seeded sample of distinct permutations."""
    if math.factorial(n_patches) <= CANDIDATE_POOL_SIZE:
        return np.asarray(list(itertools.permutations(range(n_patches))), dtype=np.int64)

    seen = set()
    while len(seen) < CANDIDATE_POOL_SIZE:
        seen.add(tuple(int(i) for i in rng.permutation(n_patches)))
    # Lexicographic order so that argmax ties resolve to the smallest order
    return np.asarray(sorted(seen), dtype=np.int64)


def generate_permutation_set(n_patches: int, set_size: int, seed: int) -> PermutationSet:
    """
    Select set_size permutations with high pairwise Hamming distance.

    Greedy max-min: start from a seeded random candidate, then repeatedly add
    the candidate maximizing the minimum distance to the already selected
    permutations, breaking ties by the lexicographically smallest order.
    Candidates are all of S_n when n! <= 10,000, otherwise a seeded pool of
    10,000 distinct permutations.

    Args:
        n_patches: Permutation length (number of patches)
        set_size: Number of permutations to select
        seed: Seed controlling the start permutation and the candidate pool

    Returns:
        PermutationSet: The selected permutations in selection order

    Raises:
        ValueError: If n_patches < 2 or set_size is outside [1, n_patches!]
    """
    validate_positive_int(n_patches, "n_patches", min_value=2)
    validate_positive_int(set_size, "set_size", min_value=1)
    group_order = math.factorial(n_patches)
    if set_size > group_order:
        raise ValueError(f"set_size {set_size} exceeds n_patches! = {group_order}")

    rng = np.random.default_rng(seed)
    candidates = _candidate_pool(n_patches, rng)
    if set_size > len(candidates):
        raise ValueError(f"set_size {set_size} exceeds the candidate pool size {len(candidates)}")

    start = int(rng.integers(len(candidates)))
    selected = [start]
    min_distance = (candidates != candidates[start]).sum(axis=1)
    min_distance[start] = -1

    while len(selected) < set_size:
        pick = int(np.argmax(min_distance))
        selected.append(pick)
        min_distance = np.minimum(min_distance, (candidates != candidates[pick]).sum(axis=1))
        min_distance[selected] = -1

    perm_set = PermutationSet(
        perms=tuple(Permutation(tuple(candidates[i])) for i in selected),
        n_patches=n_patches,
    )
    logger.info(
        f"Generated permutation set: n_patches={n_patches}, size={set_size}, "
        f"seed={seed}, min_pairwise_distance={perm_set.min_pairwise_distance}"
    )
    return perm_set


def save_set(perm_set: PermutationSet, path: Union[str, Path]) -> Path:
    """
    Write a permutation set to the plain-text format.

    Args:
        perm_set: Set to persist
        path: Destination file

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{perm_set.n_patches} {len(perm_set)}"]
    lines.extend(" ".join(str(i) for i in p.order) for p in perm_set)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Saved permutation set of size {len(perm_set)} to {path}")
    return path


def _parse_ints(text: str, line_number: int) -> List[int]:
    try:
        return [int(token) for token in text.split()]
    except ValueError:
        raise PermutationFileError(f"expected space-separated integers, got {text!r}", line_number) from None


def load_set(path: Union[str, Path]) -> PermutationSet:
    """
    Read a permutation set from the plain-text format.

    Raises:
        PermutationFileError: On malformed content, naming the offending line
    """
    path = Path(path)
    raw_lines = path.read_text(encoding="utf-8").splitlines()
    lines: List[Tuple[int, str]] = [(i + 1, line) for i, line in enumerate(raw_lines) if line.strip()]
    if not lines:
        raise PermutationFileError("empty permutation file, expected header 'n_patches set_size'", 1)

    header_line, header = lines[0]
    header_values = _parse_ints(header, header_line)
    if len(header_values) != 2:
        raise PermutationFileError(f"header must be 'n_patches set_size', got {header!r}", header_line)
    n_patches, set_size = header_values

    body = lines[1:]
    if len(body) != set_size:
        offending = body[set_size][0] if len(body) > set_size else (body[-1][0] + 1 if body else header_line + 1)
        raise PermutationFileError(f"header declares {set_size} permutations, found {len(body)}", offending)

    perms: List[Permutation] = []
    first_seen = {}
    for line_number, text in body:
        values = _parse_ints(text, line_number)
        if len(values) != n_patches:
            raise PermutationFileError(f"expected {n_patches} indices, got {len(values)}", line_number)
        try:
            perm = Permutation(tuple(values))
        except ValueError as e:
            raise PermutationFileError(str(e), line_number) from None
        if perm in first_seen:
            raise PermutationFileError(
                f"duplicate permutation {perm.order} (first seen on line {first_seen[perm]})", line_number
            )
        first_seen[perm] = line_number
        perms.append(perm)

    return PermutationSet(perms=tuple(perms), n_patches=n_patches)


def random_subset(n_patches: int, set_size: int, rng: np.random.Generator) -> PermutationSet:
    """Uniformly random subset of S_n, used as a baseline for greedy selection."""
    all_perms = list(itertools.permutations(range(n_patches)))
    picks = rng.choice(len(all_perms), size=set_size, replace=False)
    return PermutationSet(perms=tuple(Permutation(all_perms[i]) for i in picks), n_patches=n_patches)

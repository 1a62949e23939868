"""
Test suite for the permutation label space: Hamming distance, greedy
max-min selection and the permutation-set file format.
"""

import itertools

import numpy as np
import pytest

from ssl_curriculum.permutations import (
    Permutation,
    PermutationSet,
    generate_permutation_set,
    hamming_distance,
    load_set,
    random_subset,
    save_set,
)
from ssl_curriculum.utils import PermutationFileError


def greedy_oracle(n_patches, set_size, seed):
    """Plain-Python greedy max-min over all of S_n in lexicographic order."""
    candidates = list(itertools.permutations(range(n_patches)))
    start = int(np.random.default_rng(seed).integers(len(candidates)))
    selected = [start]
    while len(selected) < set_size:
        best, best_score = None, -1
        for i, candidate in enumerate(candidates):
            if i in selected:
                continue
            score = min(sum(a != b for a, b in zip(candidate, candidates[j])) for j in selected)
            if score > best_score:
                best, best_score = i, score
        selected.append(best)
    chosen = [candidates[i] for i in selected]
    return min(
        (sum(a != b for a, b in zip(p, q)) for p, q in itertools.combinations(chosen, 2)),
        default=n_patches,
    )


class TestPermutation:
    """Test the permutation value type."""

    def test_apply_and_inverse(self):
        """Output position i holds items[order[i]]; the inverse undoes apply."""
        perm = Permutation((2, 0, 1))
        assert perm.apply(["a", "b", "c"]) == ["c", "a", "b"]
        assert perm.inverse().apply(perm.apply(["a", "b", "c"])) == ["a", "b", "c"]

    def test_rejects_non_bijection(self):
        """Repeated or out-of-range indices are rejected."""
        with pytest.raises(ValueError, match="bijection"):
            Permutation((0, 0, 1))
        with pytest.raises(ValueError, match="bijection"):
            Permutation((0, 1, 3))

    def test_apply_length_mismatch(self):
        """Applying to the wrong number of items fails."""
        with pytest.raises(ValueError):
            Permutation((1, 0)).apply([1, 2, 3])


class TestHammingDistance:
    """Test Hamming distance between permutations."""

    def test_examples(self):
        """Identity vs a swap, a rotation and itself."""
        identity = Permutation.identity(4)
        assert hamming_distance(identity, Permutation((1, 0, 2, 3))) == 2
        assert hamming_distance(identity, Permutation((1, 2, 3, 0))) == 4
        assert hamming_distance(identity, identity) == 0

    def test_never_one(self):
        """Two distinct permutations differ in at least two positions."""
        perms = [Permutation(p) for p in itertools.permutations(range(4))]
        distances = {hamming_distance(p, q) for p, q in itertools.combinations(perms, 2)}
        assert 1 not in distances

    def test_length_mismatch(self):
        """Permutations of different lengths cannot be compared."""
        with pytest.raises(ValueError, match="lengths differ"):
            hamming_distance(Permutation.identity(3), Permutation.identity(4))


class TestGeneratePermutationSet:
    """Test greedy max-min selection."""

    @pytest.mark.parametrize("set_size", range(2, 25))
    def test_matches_exhaustive_greedy(self, set_size):
        """For 4 patches the greedy selection equals a plain-Python recomputation."""
        perm_set = generate_permutation_set(4, set_size, seed=7)
        assert perm_set.min_pairwise_distance == greedy_oracle(4, set_size, seed=7)

    @pytest.mark.parametrize("set_size", range(2, 25))
    def test_not_worse_than_random(self, set_size):
        """Greedy reaches at least the random-subset distance in >= 95% of trials."""
        greedy = generate_permutation_set(4, set_size, seed=0).min_pairwise_distance
        rng = np.random.default_rng(123)
        wins = sum(greedy >= random_subset(4, set_size, rng).min_pairwise_distance for _ in range(100))
        assert wins >= 95

    def test_properties(self):
        """Size, distinctness, lengths and the reported minimum agree."""
        perm_set = generate_permutation_set(4, 12, seed=0)
        assert len(perm_set) == 12
        assert len(set(perm_set.perms)) == 12
        assert all(len(p) == 4 for p in perm_set)
        assert perm_set.min_pairwise_distance >= 2

        distances = perm_set.pairwise_distances()
        off_diagonal = distances[~np.eye(12, dtype=bool)]
        assert off_diagonal.min() == perm_set.min_pairwise_distance

    def test_full_group(self):
        """Selecting all 24 permutations of 4 gives min distance 2."""
        perm_set = generate_permutation_set(4, 24, seed=3)
        assert len(set(perm_set.perms)) == 24
        assert perm_set.min_pairwise_distance == 2

    def test_single_permutation(self):
        """A one-element set reports the permutation length as its minimum."""
        perm_set = generate_permutation_set(9, 1, seed=0)
        assert len(perm_set) == 1
        assert perm_set.min_pairwise_distance == 9

    def test_pool_for_nine_patches(self):
        """Large groups are sampled from a seeded pool and stay well separated."""
        perm_set = generate_permutation_set(9, 12, seed=0)
        assert len(perm_set) == 12
        assert perm_set.min_pairwise_distance >= 6

    def test_deterministic(self):
        """The same seed yields the same ordered set."""
        assert generate_permutation_set(9, 10, seed=5).perms == generate_permutation_set(9, 10, seed=5).perms

    def test_rejects_oversized_set(self):
        """More permutations than n! is an error."""
        with pytest.raises(ValueError, match="exceeds"):
            generate_permutation_set(4, 25, seed=0)

    def test_rejects_short_permutations(self):
        """n_patches must be at least 2."""
        with pytest.raises(ValueError):
            generate_permutation_set(1, 1, seed=0)


class TestPermutationSetFile:
    """Test saving and loading the plain-text format."""

    def test_save_then_load(self, tmp_path):
        """Saved sets load back in the same label order."""
        perm_set = generate_permutation_set(4, 12, seed=0)
        path = save_set(perm_set, tmp_path / "perms.txt")

        lines = path.read_text().splitlines()
        assert lines[0] == "4 12"
        assert len(lines) == 13

        loaded = load_set(path)
        assert loaded.perms == perm_set.perms
        assert loaded.label_of(perm_set[5]) == 5

    def test_empty_file(self, tmp_path):
        """An empty file is a parse error."""
        path = tmp_path / "empty.txt"
        path.write_text("")
        with pytest.raises(PermutationFileError, match="empty"):
            load_set(path)

    def test_duplicate_names_both_lines(self, tmp_path):
        """Duplicates are reported on the repeated line with the first occurrence."""
        path = tmp_path / "dup.txt"
        path.write_text("3 3\n0 1 2\n2 1 0\n0 1 2\n")
        with pytest.raises(PermutationFileError, match="line 4:.*first seen on line 2"):
            load_set(path)

    def test_wrong_length(self, tmp_path):
        """Rows with the wrong number of indices name their line."""
        path = tmp_path / "short.txt"
        path.write_text("3 2\n0 1 2\n0 1\n")
        with pytest.raises(PermutationFileError, match="line 3:"):
            load_set(path)

    def test_not_a_bijection(self, tmp_path):
        """Rows that are not permutations name their line."""
        path = tmp_path / "bad.txt"
        path.write_text("3 2\n0 1 2\n0 0 2\n")
        with pytest.raises(PermutationFileError, match="line 3:"):
            load_set(path)

    def test_count_mismatch(self, tmp_path):
        """The header count must match the body."""
        path = tmp_path / "count.txt"
        path.write_text("3 3\n0 1 2\n2 1 0\n")
        with pytest.raises(PermutationFileError, match="declares 3"):
            load_set(path)

    def test_non_integer_header(self, tmp_path):
        """Non-numeric headers are rejected."""
        path = tmp_path / "header.txt"
        path.write_text("three two\n0 1 2\n")
        with pytest.raises(PermutationFileError, match="line 1:"):
            load_set(path)

    def test_set_rejects_mixed_lengths(self):
        """PermutationSet requires a shared length."""
        with pytest.raises(ValueError):
            PermutationSet(perms=(Permutation((0, 1)), Permutation((0, 1, 2))), n_patches=2)

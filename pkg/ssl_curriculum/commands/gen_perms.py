"""
Permutation-set generation command.

This module writes a jigsaw label space to disk and reports its minimum
pairwise Hamming distance.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Union

from ssl_curriculum.commands.common import error_response_for
from ssl_curriculum.permutations import generate_permutation_set, save_set
from ssl_curriculum.utils import create_success_response, logged_command

logger = logging.getLogger(__name__)


@logged_command
def gen_perms(n_patches: int, set_size: int, seed: int, out: Union[str, Path]) -> Dict[str, Any]:
    """
    Generate a maximal-distance permutation set and save it.

    Args:
        n_patches: Permutation length (4 for a 2x2 grid, 9 for 3x3)
        set_size: Number of permutations (at most n_patches!)
        seed: Generation seed
        out: Destination file

    Returns:
        Dict containing:
        - success (bool): Whether the set was written
        - data (dict): path, n_patches, set_size and min_pairwise_distance
        - error (dict, optional): Error details if generation failed

    Examples:
        result = gen_perms(4, 12, seed=0, out="perms.txt")
        if result["success"]:
            print(result["data"]["min_pairwise_distance"])
    """
    try:
        perm_set = generate_permutation_set(n_patches, set_size, seed)
        path = save_set(perm_set, out)

        return create_success_response(
            data={
                "path": str(path),
                "n_patches": perm_set.n_patches,
                "set_size": len(perm_set),
                "min_pairwise_distance": perm_set.min_pairwise_distance,
            },
            metadata={"seed": seed},
        )

    except Exception as e:
        return error_response_for(e, "gen-perms")

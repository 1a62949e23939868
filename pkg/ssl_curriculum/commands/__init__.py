"""
Command implementations behind the ssl-curriculum CLI.

Each command returns a success or error envelope; the CLI turns envelopes
into output and exit codes.
"""

from ssl_curriculum.commands.gen_perms import gen_perms
from ssl_curriculum.commands.pretrain import pretrain
from ssl_curriculum.commands.transfer_eval import transfer_eval
from ssl_curriculum.commands.compare import compare
from ssl_curriculum.commands.neighbors import neighbors

__all__ = [
    "gen_perms",
    "pretrain",
    "transfer_eval",
    "compare",
    "neighbors",
]

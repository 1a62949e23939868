"""
ssl-curriculum package.

This package provides jigsaw and patch-pair pretext tasks, a shared-weight
encoder, jitter curricula for pretext training, downstream transfer
evaluation and representation probes.
"""

__version__ = "0.1.0"

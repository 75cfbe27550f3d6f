"""Counter-based random streams.

Every replication batch draws from a Philox generator keyed by
(root seed, stream tag) with the chunk index in the counter block.
Streams are therefore independent of execution order and of the number
of worker threads, which is what makes runs reproducible bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Replications are sampled in fixed-size chunks.  The chunk grid is part of
# the reproducibility contract: partial results merge on chunk boundaries.
CHUNK = 4096

# Variance is estimated from batch means; counts within one replication are
# dependent, so the batch is the independence unit.
VARIANCE_BATCH = 64


def stream_tag(label: str | int) -> int:
    """Stable 64-bit tag for a named stream (not Python's randomized hash)."""
    if isinstance(label, int):
        return label & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(label.encode("utf8")).digest()
    return int.from_bytes(digest[:8], "little")


def chunk_rng(seed: int, stream: str | int, chunk: int) -> np.random.Generator:
    """Generator for one sampling chunk of one stream."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream_tag(stream)], dtype=np.uint64)
    counter = np.array([0, chunk, 0, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))

"""
Counter-based random streams.

A stream is keyed by (master seed, stream id); block ``j`` of the stream is
a Philox generator whose counter starts at ``j`` in its top word. Any worker
can open any block without coordination, so results do not depend on how
blocks are scheduled.
"""

import numpy as np


def stream_key(seed, stream):
    return np.random.SeedSequence([int(seed), int(stream)]).generate_state(2, np.uint64)


def block_generator(seed, stream, block):
    """numpy Generator for one block of the (seed, stream) stream."""
    counter = np.array([0, 0, 0, int(block)], dtype=np.uint64)
    bit_generator = np.random.Philox(counter=counter, key=stream_key(seed, stream))
    return np.random.Generator(bit_generator)


def block_sizes(total, chunk):
    """Sizes of the fixed blocks that make up ``total`` samples."""
    if total < 1:
        raise ValueError("sample count must be positive")
    full, rest = divmod(int(total), int(chunk))
    return [int(chunk)] * full + ([rest] if rest else [])

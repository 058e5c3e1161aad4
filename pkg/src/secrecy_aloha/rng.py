"""Keyed random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, stream)``. Replications, users and Monte Carlo batches each own a
distinct stream id, so results do not depend on evaluation order.
"""

import numpy as np


def make_generator(seed: int, *stream: int) -> np.random.Generator:
    """Return an independent Philox generator for ``seed`` and stream path ``stream``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))

"""Seeded random substreams.

Every randomized routine draws from a Philox4x64 generator (counter-based,
Salmon et al. 2011, as shipped with numpy) keyed by ``(seed, stream)``.
Work split across streams therefore gives the same output no matter how
many workers process the streams.
"""

import numpy as np


def substream(seed, *stream):
    """Return a Philox-backed ``Generator`` for ``(seed, *stream)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def fresh_seed():
    """Draw a seed from OS entropy, for callers that did not supply one."""
    return int(np.random.SeedSequence().entropy % (2**63))

import zlib

import numpy as np


def substream(seed, name, *keys):
    """Independent generator for a named consumer of the root seed.

    Streams are keyed by ``(seed, crc32(name), *keys)`` so that changing how
    many draws one phase makes never shifts another phase's numbers.
    """
    entropy = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode())]
    entropy.extend(int(k) & 0xFFFFFFFF for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy))

"""Counter-based splittable random streams.

Every random draw in the package flows from a Philox generator keyed by
(seed, trajectory index, channel).  Distinct trajectories and channels get
provably independent streams, identical keys reproduce bit-identical
draws, and twin runs can share a noise realization by sharing the key.
"""

import numpy as np

WIENER = 0
JUMP_TIMES = 1
MARKS = 2


def stream(seed, path_index=0, channel=0):
    """Independent generator for the given (seed, trajectory, channel) key."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(int(path_index), int(channel)))
    return np.random.Generator(np.random.Philox(ss))

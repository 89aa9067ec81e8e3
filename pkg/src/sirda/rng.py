"""Keyed random streams.

Every draw in a run comes from a generator addressed by ``(seed, *key)``,
e.g. ``(seed, PROCESS, step)``. Draws never depend on the order in which
other streams were consumed, so results do not change with the number of
workers or the order in which runs execute.
"""

import numpy as np

PRIOR = 0
PROCESS = 1
DRIFT = 2
PERTURB = 3
DATA = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
    )


def derive_seed(seed: int, index: int) -> int:
    """Child seed for replicate ``index`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(0xC0FFEE, int(index)))
    return int(ss.generate_state(1, dtype=np.uint32)[0])

"""Counter-based random substreams.

Every random draw in a simulation comes from a Philox generator keyed by a
path of integers, e.g. ``(master_seed, drop, purpose)``.  Two streams with
the same path always produce the same numbers, no matter in which order or
in which process they are created, which is what makes parallel sweeps
reproducible.
"""

from __future__ import annotations

import numpy as np

# purpose tags used as the last element of a stream path
USERS = 0
VR_CENTERS = 1
CLUSTERS = 2
LSP = 3
MPC = 4
FADING = 5
SELECTION = 6
PERTURB = 7


class RandomStream:
    """A named position in the tree of substreams rooted at ``seed``."""

    __slots__ = ("seed", "key")

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)

    def spawn(self, *key: int) -> "RandomStream":
        return RandomStream(self.seed, self.key + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, key={self.key})"


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, a RandomStream or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomStream):
        return rng.generator()
    return RandomStream(rng).generator()

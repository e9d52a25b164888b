"""Seeded random-number streams.

Every stochastic component in the package draws from a numpy ``Generator``
backed by PCG64. A single experiment seed is split into three independent
streams with a fixed spawn order, so that e.g. changing the number of
Bayesian-optimization iterations never perturbs the simulated noise:

    index 0: process-noise stream      (simulator, w_k)
    index 1: measurement-noise stream  (simulator, v_k)
    index 2: optimizer stream          (initial design, acquisition, GP refits)

Runs with equal seeds are bit-identical on a given numpy version.
"""

from __future__ import annotations

import numpy as np

_PROCESS, _MEASUREMENT, _OPTIMIZER = 0, 1, 2


class SeedStreams:
    """The three child streams derived from one experiment seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        root = np.random.SeedSequence(self.seed)
        children = root.spawn(3)
        self.process = children[_PROCESS]
        self.measurement = children[_MEASUREMENT]
        self.optimizer = children[_OPTIMIZER]

    def process_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.process))

    def measurement_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.measurement))

    def optimizer_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.optimizer))


def spawn_ints(seed_seq: np.random.SeedSequence, n: int) -> list[int]:
    """Derive ``n`` integer sub-seeds from a SeedSequence, in a fixed order."""
    return [int(child.generate_state(1, np.uint32)[0]) for child in seed_seq.spawn(n)]

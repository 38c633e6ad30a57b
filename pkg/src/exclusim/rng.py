"""Counter-based random streams.

Every draw is a pure function of ``(seed, purpose, t, stream, i)``: a Philox
generator is keyed by the seed and positioned at a counter built from the
other coordinates, so the i-th value of a block never depends on how many
values were requested or in which order blocks were evaluated.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# purpose tags
VELOCITY = 1
INIT = 2
ACCEL = 3


def uniforms(seed: int, purpose: int, t: int, stream: int, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) for the block ``(seed, purpose, t, stream)``."""
    counter = np.array([0, t & _MASK64, purpose & _MASK64, stream & _MASK64], dtype=np.uint64)
    bitgen = np.random.Philox(key=seed & _MASK64, counter=counter)
    return np.random.Generator(bitgen).random(n)


def generator(seed: int, purpose: int, stream: int = 0) -> np.random.Generator:
    """A sequential generator for one-off uses (initial configurations)."""
    counter = np.array([0, 0, purpose & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed & _MASK64, counter=counter))

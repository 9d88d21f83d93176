"""Reproducible random streams.

Every stochastic step in the package draws from a counter-based Philox
generator keyed by (master seed, substream id). The same key always yields
the same draw sequence, independent of scheduling or process layout, so
per-node and per-trial work can run in any order and still reproduce
byte-identical results.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for substream `stream` of master `seed`.

    Distinct (seed, stream) keys give statistically independent streams.
    """
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, index: int) -> int:
    """Well-mixed 64-bit child seed for repeated-run protocols.

    Used when a whole pipeline run (not a single stream) needs its own
    master seed, e.g. run i of a repeat-10 experiment.
    """
    ss = np.random.SeedSequence(entropy=[seed & _MASK64, index & _MASK64])
    return int(ss.generate_state(1, np.uint64)[0])

"""Counter-based random streams keyed by (seed, path, purpose).

Each path owns a Philox stream whose key is a pure function of the run seed,
the path index and a small tag, so the draws for path ``p`` never depend on
how paths are split across workers.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# purpose tags (low bits of the tag)
BROWNIAN = 0
JUMPS = 1


def stream_tag(purpose: int, stream: int = 0) -> int:
    """Combine a purpose with an experiment-level stream id (e.g. the global
    solve vs. the localized restart in the converse experiment)."""
    return (stream << 4) | purpose


def path_generator(seed: int, path: int, tag: int) -> np.random.Generator:
    if not 0 <= path < (1 << 40):
        raise ValueError(f"path index {path} out of range")
    key = np.array([seed & MASK64, (tag << 40) | path], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))

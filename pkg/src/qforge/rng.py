"""Root-seeded RNG substreams.

All randomness in the package flows from a single root seed. Components
never share a generator: each derives its own substream from the root seed
plus a list of labels (module name, purpose, trial index, ...), so results
are reproducible regardless of call interleaving or thread scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_SEED = 42


def _label_entropy(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, *labels: str | int) -> np.random.Generator:
    """Return a Generator keyed by (seed, labels).

    String labels are hashed to 64-bit entropy words; integer labels (for
    example a Monte Carlo trial index) are used as-is.
    """
    entropy = [int(seed)]
    for label in labels:
        entropy.append(_label_entropy(label) if isinstance(label, str) else int(label))
    return np.random.default_rng(np.random.SeedSequence(entropy))

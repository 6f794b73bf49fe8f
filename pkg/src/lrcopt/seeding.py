"""Deterministic random streams derived from a single master seed."""

import hashlib

import numpy as np


def stream(master_seed: int, *names) -> np.random.Generator:
    """Return the generator for the stream named by ``names``.

    Every consumer of randomness in this package derives its generator here,
    so one master seed pins an entire run while unrelated components stay
    decorrelated.  Names may mix strings and integers, e.g.
    ``stream(seed, "benchmark", n_nodes, trial)``.
    """
    tag = "/".join(str(n) for n in names).encode()
    digest = hashlib.sha256(tag).digest()
    key = tuple(int.from_bytes(digest[i:i + 4], "little") for i in (0, 4, 8, 12))
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.default_rng(seq)


def substream_seed(master_seed: int, *names) -> int:
    """Derive a plain integer seed for APIs that take one."""
    return int(stream(master_seed, *names).integers(0, 2**63 - 1))

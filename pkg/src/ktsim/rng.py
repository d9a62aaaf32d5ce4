"""Deterministic random-stream derivation.

Every stochastic consumer gets its own generator derived from
(master_seed, stream label, index). Streams are independent of scheduling
and, crucially, evaluation episodes share one stream per index across all
model conditions so that conditions can be seed-paired.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Stream labels used across the package.
STREAM_TRAIN = "train"
STREAM_TRAIN_POLICY = "train-policy"
STREAM_EVAL = "eval"
STREAM_FIT = "fit"
STREAM_SESSION = "session"


def stream_key(label: str) -> int:
    """Stable 64-bit key for a stream label (platform-independent)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def seed_entropy(master_seed: int, label: str, index: int) -> tuple[int, int, int]:
    """Entropy tuple fed to the generator; recorded in logs for replay."""
    return (int(master_seed), stream_key(label), int(index))


def stream_rng(master_seed: int, label: str, index: int) -> np.random.Generator:
    return np.random.default_rng(seed_entropy(master_seed, label, index))


def rng_from_entropy(entropy) -> np.random.Generator:
    """Rebuild a generator from a recorded entropy tuple."""
    return np.random.default_rng(tuple(int(x) for x in entropy))

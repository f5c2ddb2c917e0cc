"""Seed handling.

Every random stream in the package is a PCG64 generator keyed by a
``numpy.random.SeedSequence`` built from the user seed plus a spawn key
``(namespace, *stream_ids)``.  Child seeds for per-trial work follow

    child_seed = mix(seed, stream_id)
               = SeedSequence(seed, spawn_key=(NS_CHILD, stream_id)).generate_state(1, uint64)[0]

so trial ``i`` of an experiment sees the same stream no matter how many
workers run or in which order trials finish.
"""
from __future__ import annotations

import os

import numpy as np

from .errors import DomainError

MAX_SEED = (1 << 64) - 1

# stream namespaces; kept disjoint so quadrature never reuses instance streams
NS_INSTANCE = 1
NS_LATENT = 2
NS_BATCH = 3
NS_QUADRATURE = 4
NS_SPACINGS = 5
NS_CHILD = 6

SEED_ENV = "STABLELAB_SEED"
DEFAULT_SEED = 0


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise DomainError(f"seed must lie in [0, 2**64), got {seed}")
    return seed


def generator(seed: int, namespace: int, *streams: int) -> np.random.Generator:
    """Return the PCG64 generator for ``(seed, namespace, *streams)``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(namespace, *streams))
    return np.random.Generator(np.random.PCG64(ss))


def mix(seed: int, stream_id: int) -> int:
    """Derive a 64-bit child seed from a parent seed and a stream index."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=(NS_CHILD, int(stream_id)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_seed() -> int:
    """Seed used when none is given: ``$STABLELAB_SEED`` or 0."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return check_seed(int(raw, 0))
    except ValueError as exc:
        raise DomainError(f"{SEED_ENV}={raw!r} is not a valid seed") from exc

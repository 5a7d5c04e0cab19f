"""Deterministic random substreams for replications.

Every sampling site derives its own generator from (master seed,
replication index, purpose tag, ...) so that replications are independent
while scenario runs sharing a master seed reuse identical draws wherever
the scenario does not interfere (common random numbers).  Bus-side draws
are keyed per trip and demand draws per (trip, stop), which keeps draw
sequences aligned even when event interleaving changes.
"""

from __future__ import annotations

import random

_M64 = (1 << 64) - 1

#: Purpose tags; any two sites with different tags get unrelated streams.
TAG_BUS = 1
TAG_DEMAND = 2
TAG_SYNTH = 3


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def mix64(*parts: int) -> int:
    """Avalanche an integer tuple into one 64-bit seed."""
    h = 0x8F1BBCDC_9E3779B9
    for part in parts:
        h = _splitmix64(h ^ (part & _M64))
    return h


def substream(*parts: int) -> random.Random:
    """A generator seeded from the given key tuple."""
    return random.Random(mix64(*parts))


def poisson_draw(lam: float, u: float) -> int:
    """Inverse-transform Poisson draw from one uniform variate.

    Monotone in lam for fixed u, so scaled-up rates can only increase the
    count drawn from the same underlying uniform.
    """
    if lam < 0:
        raise ValueError("rate must be non-negative")
    if lam == 0.0:
        return 0
    import math

    k = 0
    p = math.exp(-lam)
    cumulative = p
    while cumulative < u:
        k += 1
        p *= lam / k
        cumulative += p
        if p == 0.0:  # guard against u in the extreme upper tail
            break
    return k

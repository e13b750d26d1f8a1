"""Deterministic, schedule-independent randomness.

All sampling in the pipeline draws from generators keyed by the global
seed plus a context label (stage name, cluster id, stratum), so results
never depend on iteration order, wall clock, or worker count.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(*parts) -> random.Random:
    return random.Random(derive_seed(*parts))

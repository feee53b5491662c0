"""Seeded, splittable random streams.

Every stream is a :class:`numpy.random.Generator` over PCG64.  Replica ``i`` of
a run with master seed ``s`` always gets the child stream keyed by ``(s, i)``,
so results do not depend on scheduling or worker count.
"""
import numpy as np


def stream(seed, *key):
    """Return a generator for ``seed`` and an optional child key path."""
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("cannot derive a keyed child from a live Generator")
        return seed
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def replica_stream(master_seed, replica, case=0):
    """Stream of replica ``replica``; ``case > 0`` selects a disjoint family (second law of a contrast)."""
    if case:
        return stream(master_seed, 2, case, replica)
    return stream(master_seed, 0, replica)


def auxiliary_stream(master_seed, label):
    """Stream for a named auxiliary computation (oracles, MC cross-checks)."""
    # small stable integer from the label; keeps child keys disjoint from replicas
    h = 0
    for ch in label.encode():
        h = (h * 131 + ch) % (2**31 - 1)
    return stream(master_seed, 1, h)

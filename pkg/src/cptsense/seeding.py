"""Deterministic per-run, per-purpose random streams."""
import numpy as np

PURPOSES = {"bath": 0, "counts": 1, "sse": 2, "thin": 3, "point": 4}


def derive_rng(master_seed, *keys):
    """Independent generator for ``(master_seed, *keys)``.

    String keys are mapped through :data:`PURPOSES`, so
    ``derive_rng(seed, run, "bath")`` always yields the same stream no
    matter which worker draws it or in which order.
    """
    spawn_key = tuple(PURPOSES[k] if isinstance(k, str) else int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=spawn_key))


def derive_seed(master_seed, *keys):
    """Integer seed drawn from the stream of :func:`derive_rng`."""
    spawn_key = tuple(PURPOSES[k] if isinstance(k, str) else int(k) for k in keys)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=spawn_key)
    return int(ss.generate_state(1, dtype=np.uint32)[0])

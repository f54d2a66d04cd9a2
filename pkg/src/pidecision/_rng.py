"""Deterministic, splittable random streams.

Every random quantity is drawn from a stream keyed by a master seed plus a
tuple of integer or string labels, so results never depend on scheduling.
"""
import zlib

import numpy as np

CHUNK = 4096


def _label(key):
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key)


def stream(seed, *keys):
    """Return a ``Generator`` for ``(seed, *keys)``; same keys, same stream."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(_label(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def chunks(total, size=CHUNK):
    """Fixed ``(index, start, stop)`` partition of ``range(total)``."""
    return [(i, s, min(s + size, total)) for i, s in enumerate(range(0, total, size))]


def run_chunks(fn, total, workers=None, size=CHUNK):
    """Evaluate ``fn(index, start, stop)`` for every chunk, ordered by index."""
    parts = chunks(total, size)
    if workers and workers > 1 and len(parts) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: fn(*p), parts))
    return [fn(*p) for p in parts]

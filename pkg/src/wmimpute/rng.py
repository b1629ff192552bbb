"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which builds a
``numpy.random.Generator`` on the PCG64 bit generator. PCG64's output stream is
fixed by numpy across platforms, so a seed fully determines a dataset, split,
mask or trained model.
"""

import zlib

import numpy as np

PRNG_NAME = "numpy.PCG64"


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *labels) -> int:
    """Stable child seed for ``(seed, *labels)``; string labels are CRC32-hashed."""
    words = [int(seed)]
    for label in labels:
        words.append(zlib.crc32(label.encode()) if isinstance(label, str) else int(label))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint32)[0])

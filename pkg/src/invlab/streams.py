"""Labeled random streams split from a single document seed."""

import zlib

import numpy as np

#: stream labels used by the library; echoed in reports
STREAM_LABELS = (
    "gamma",
    "drift-bound",
    "drift-audit",
    "a3-candidates",
    "admissibility",
    "policy-audit",
)


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``label``, reproducible from ``seed``.

    The child key is the CRC-32 of the label, so adding a new consumer never
    shifts the draws of existing ones.
    """
    key = zlib.crc32(label.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(key,))
    return np.random.default_rng(ss)

"""Named, independent random substreams from one seed.

Each name maps to a Philox key derived from ``(seed, crc32(name))``, so a
stream's draws never depend on which other streams were used.
"""

from __future__ import annotations

import zlib

import numpy as np

CHANNEL_INIT = "channel-init"
FADING = "fading"
MOTION = "motion"
NOISE = "channel-noise"
IMPAIRMENT = "impairment"
CALIBRATION = "calibration"
CODEBOOK = "codebook"


def stream(seed: int, name: str) -> np.random.Generator:
    key = np.array([int(seed) & 0xFFFF_FFFF_FFFF_FFFF, zlib.crc32(name.encode())], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class RngStreams:
    """Hands out one generator per name; asking twice returns the same object."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._streams:
            self._streams[name] = stream(self.seed, name)
        return self._streams[name]

    def fresh(self, name: str) -> np.random.Generator:
        return stream(self.seed, name)

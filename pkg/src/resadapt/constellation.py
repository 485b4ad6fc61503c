"""Gray-labeled QPSK and 16-QAM with unit average energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError

# 2-bit Gray code per real dimension, index = label
_PAM4_GRAY = np.array([-3.0, -1.0, 3.0, 1.0])  # 00, 01, 10, 11
_PAM2 = np.array([1.0, -1.0])  # 0, 1


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray  # indexed by integer label
    bits_per_symbol: int

    @property
    def size(self) -> int:
        return len(self.points)

    def bit_map(self) -> np.ndarray:
        """(M, bits_per_symbol) array of label bits, MSB first."""
        labels = np.arange(self.size)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return (labels[:, None] >> shifts) & 1

    def modulate(self, labels) -> np.ndarray:
        return self.points[labels]

    def detect(self, x) -> np.ndarray:
        """Nearest-point labels for (already descaled) estimates ``x``."""
        x = np.asarray(x, dtype=complex)
        d = np.abs(x[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)


@lru_cache(maxsize=None)
def get_constellation(name: str) -> Constellation:
    name = name.lower()
    if name == "qpsk":
        labels = np.arange(4)
        pts = (_PAM2[labels >> 1] + 1j * _PAM2[labels & 1]) / math.sqrt(2.0)
        return Constellation("qpsk", pts, 2)
    if name in ("16qam", "16-qam"):
        labels = np.arange(16)
        pts = (_PAM4_GRAY[labels >> 2] + 1j * _PAM4_GRAY[labels & 3]) / math.sqrt(10.0)
        return Constellation("16qam", pts, 4)
    raise ConfigError(f"unknown modulation {name!r}; expected 'qpsk' or '16qam'")


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def bit_errors(tx_labels, rx_labels) -> int:
    """Number of differing label bits, summed over all symbols."""
    diff = np.bitwise_xor(np.asarray(tx_labels), np.asarray(rx_labels))
    return int(_POPCOUNT[diff].sum())

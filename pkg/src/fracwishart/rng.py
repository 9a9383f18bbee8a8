"""Counter-based random streams.

Every variate is a pure function of ``(seed, stream, index)``: the Philox key
is the seed and the stream identifier occupies the upper 128 bits of the
256-bit counter, so index ``j`` of a stream never depends on which other
streams were drawn, or in which order. Gaussians are produced by inverting
the normal CDF, which keeps the mapping from uniforms one-to-one.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_REPLICA_BITS = 32


def child_seed(master: int, replica: int) -> int:
    """Seed for replica ``replica`` of an ensemble with master seed ``master``.

    Injective in ``(master, replica)`` for ``0 <= replica < 2**32``.
    """
    master = int(master)
    replica = int(replica)
    if master < 0:
        raise ValueError("master seed must be non-negative")
    if not 0 <= replica < (1 << _REPLICA_BITS):
        raise ValueError("replica index must lie in [0, 2**32)")
    return (master << _REPLICA_BITS) | replica


def _bit_generator(seed: int, stream: int) -> np.random.Philox:
    seed = int(seed)
    stream = int(stream)
    if not 0 <= seed < (1 << 128):
        raise ValueError("seed must lie in [0, 2**128)")
    if not 0 <= stream < (1 << 128):
        raise ValueError("stream id must lie in [0, 2**128)")
    # explicit uint64 so words >= 2**63 are not routed through float64
    key = np.array([seed & _MASK64, seed >> 64], dtype=np.uint64)
    counter = np.array([0, 0, stream & _MASK64, stream >> 64], dtype=np.uint64)
    return np.random.Philox(key=key, counter=counter)


def uniforms(seed: int, stream: int, count: int) -> np.ndarray:
    """First ``count`` uniforms of stream ``stream``, strictly inside (0, 1)."""
    raw = _bit_generator(seed, stream).random_raw(int(count))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed: int, stream: int, count: int) -> np.ndarray:
    """First ``count`` standard normals of stream ``stream`` (inverse-CDF)."""
    return ndtri(uniforms(seed, stream, count))

"""Deterministic per-link random streams.

Every link owns a few independent splitmix64 streams (channel timers,
arrivals, protocol jitter).  Stream states are derived from a single master
seed through :class:`numpy.random.SeedSequence`, so a run is reproducible
bit-for-bit from ``(seed, config)`` and the draws of one link do not depend on
the order in which other links are processed.
"""

import numpy as np
from numba import njit

STREAM_CHANNEL = 0
STREAM_ARRIVAL = 1
STREAM_PROTOCOL = 2
N_STREAMS = 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def make_streams(seed, n_links, n_streams=N_STREAMS):
    """Return a ``(n_streams, n_links)`` uint64 state array for ``seed``."""
    ss = np.random.SeedSequence(int(seed))
    words = ss.generate_state(n_streams * n_links * 2, dtype=np.uint32).astype(np.uint64)
    states = (words[0::2] << np.uint64(32)) | words[1::2]
    # link-major layout keeps a link's streams independent of the network size
    return np.ascontiguousarray(states.reshape(n_links, n_streams).T)


@njit(cache=True)
def next_u64(rs, s, l):
    x = rs[s, l] + _GOLDEN
    rs[s, l] = x
    x = (x ^ (x >> _S30)) * _MIX1
    x = (x ^ (x >> _S27)) * _MIX2
    return x ^ (x >> _S31)


@njit(cache=True)
def uniform(rs, s, l):
    """Uniform draw on (0, 1]."""
    return (float(next_u64(rs, s, l) >> _S11) + 1.0) * _INV53


@njit(cache=True)
def exponential(rs, s, l, rate):
    return -np.log(uniform(rs, s, l)) / rate

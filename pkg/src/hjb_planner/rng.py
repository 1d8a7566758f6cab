"""Counter-based normal draws for schedule-independent simulation.

Every standard-normal variate is a pure function of
(seed, path_index, step, component): the tuple is packed into the counter
and key of a Philox-4x32 block cipher (10 rounds, the constants of the
Random123 reference implementation), and each 128-bit output block is
turned into two doubles and then two normals by Box-Muller.  Paths can
therefore be simulated in any order, in any batch shape, or re-run in
isolation, and always see identical noise.

Reference: Salmon, Moraes, Dror, Shaw, "Parallel random numbers: as easy
as 1, 2, 3" (SC 2011).
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_ROUNDS = 10

_TWO_POW_NEG64 = 2.0**-64


def _philox_4x32(c0, c1, c2, c3, k0, k1):
    """One Philox-4x32-10 block per lane; inputs are uint64 arrays holding
    32-bit values."""
    for _ in range(_ROUNDS):
        prod0 = _M0 * c0
        prod1 = _M1 * c2
        hi0 = prod0 >> np.uint64(32)
        lo0 = prod0 & _MASK32
        hi1 = prod1 >> np.uint64(32)
        lo1 = prod1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def normals(seed: int, path_index, step: int, n_components: int) -> np.ndarray:
    """Standard normals of shape (len(path_index), n_components).

    The counter words are (step, path low 32, block, path high 32) and the
    key words are the seed halves; block enumerates component pairs, which
    Box-Muller maps to components (2k, 2k+1).
    """
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 bits")
    if step < 0 or step >= 2**32:
        raise ValueError("step must fit in 32 bits")
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    paths = np.atleast_1d(np.asarray(path_index, dtype=np.uint64))
    n_blocks = (n_components + 1) // 2

    block = np.arange(n_blocks, dtype=np.uint64)
    c0 = np.broadcast_to(np.uint64(step), (paths.size, n_blocks))
    c1 = np.broadcast_to((paths & _MASK32)[:, None], (paths.size, n_blocks))
    c2 = np.broadcast_to(block[None, :], (paths.size, n_blocks))
    c3 = np.broadcast_to((paths >> np.uint64(32))[:, None], (paths.size, n_blocks))
    k0 = np.uint64(seed) & _MASK32
    k1 = np.uint64(seed) >> np.uint64(32)

    o0, o1, o2, o3 = _philox_4x32(
        c0.copy(), np.ascontiguousarray(c1), np.ascontiguousarray(c2),
        np.ascontiguousarray(c3), k0, k1,
    )

    # two 64-bit words -> u1 in (0, 1] (safe for log), u2 in [0, 1)
    word1 = (o0 << np.uint64(32)) | o1
    word2 = (o2 << np.uint64(32)) | o3
    u1 = (word1.astype(np.float64) + 1.0) * _TWO_POW_NEG64
    u2 = word2.astype(np.float64) * _TWO_POW_NEG64

    radius = np.sqrt(-2.0 * np.log(u1))
    angle = (2.0 * np.pi) * u2
    z = np.empty((paths.size, 2 * n_blocks))
    z[:, 0::2] = radius * np.cos(angle)
    z[:, 1::2] = radius * np.sin(angle)
    return z[:, :n_components]

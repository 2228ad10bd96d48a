"""Counter-based Philox4x32-10 generator, compiled with numba.

Every random word is a pure function of ``(key, counter)``, so a path's
stream depends only on the seed and the path index and never on the order
in which paths are simulated.
"""
import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
_INV32 = 1.0 / 4294967296.0

# set on word 3 of the counter for the jump stream of a Lévy path
JUMP_STREAM = np.uint32(0x80000000)


@nb.njit(nogil=True, cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds; all arguments are ``uint32``."""
    for _ in range(10):
        p0 = _M0 * np.uint64(c0)
        p1 = _M1 * np.uint64(c2)
        hi0 = np.uint32(p0 >> _SHIFT)
        lo0 = np.uint32(p0 & _MASK)
        hi1 = np.uint32(p1 >> _SHIFT)
        lo1 = np.uint32(p1 & _MASK)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@nb.njit(nogil=True, cache=True)
def to_unit(word):
    """Map a 32-bit word to the open interval (0, 1)."""
    return (np.float64(word) + 0.5) * _INV32


def split_seed(seed):
    """64-bit seed to the two key words."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return np.uint32(seed & 0xFFFFFFFF), np.uint32(seed >> 32)


def philox_block(counter, key):
    """Python-level wrapper returning the four output words."""
    c = [np.uint32(v) for v in counter]
    k = [np.uint32(v) for v in key]
    return tuple(int(v) for v in philox4x32(c[0], c[1], c[2], c[3], k[0], k[1]))


def uniforms(seed, path_index, n):
    """``n`` uniforms from the Gaussian stream of one path (for testing)."""
    k0, k1 = split_seed(seed)
    out = np.empty(4 * ((n + 3) // 4))
    for step in range(out.size // 4):
        words = philox4x32(np.uint32(step), np.uint32(0), np.uint32(path_index & 0xFFFFFFFF),
                           np.uint32(path_index >> 32), k0, k1)
        for j in range(4):
            out[4 * step + j] = to_unit(words[j])
    return out[:n]

"""Pure-numpy implementation of the per-cell kernels.

This is the fallback used when the compiled ``_ckernels`` extension is not
available. Both backends share the same hashing and the same inverse-normal
routine (cephes ``ndtri``), so they agree cell for cell.
"""

import numpy as np
from scipy.special import ndtri

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def splitmix64_array(x):
    """Vectorised splitmix64 step on a uint64 array (wraps modulo 2**64)."""
    with np.errstate(over="ignore"):
        z = x + GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _cell_hashes(row_keys, row_bits):
    cols = np.arange(row_bits, dtype=np.uint64)
    keys = np.asarray(row_keys, dtype=np.uint64)
    return splitmix64_array(keys[:, None] ^ cols[None, :]).ravel()


def uniform_field(row_keys, row_bits):
    """Uniform (0, 1) value for every cell of the given rows."""
    h = _cell_hashes(row_keys, row_bits)
    return ((h >> _S11).astype(np.float64) + 0.5) * _INV53


def normal_field(row_keys, row_bits, mean, sd):
    """``mean + sd * z`` with ``z`` standard normal, one value per cell."""
    z = ndtri(uniform_field(row_keys, row_bits))
    return mean + sd * z


def flip_kernel(row_keys, row_bits, retention_log, hammer_rate, charged,
                noise_sd, temp_factor, inv_time):
    """Decide which cells flip during one query.

    A charged cell flips when its decay rate (scaled by ``temp_factor`` and a
    lognormal jitter) plus its hammer-induced rate reaches ``inv_time``.
    """
    log_r = retention_log
    if noise_sd > 0.0:
        log_r = log_r + noise_sd * ndtri(uniform_field(row_keys, row_bits))
    rate = temp_factor * np.exp(-log_r) + hammer_rate
    return (charged.astype(bool) & (rate >= inv_time)).astype(np.uint8)

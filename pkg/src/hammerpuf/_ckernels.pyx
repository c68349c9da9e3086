# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-cell kernels. Mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdint cimport uint64_t, uint8_t
from scipy.special.cython_special cimport ndtri

cnp.import_array()

cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t splitmix64(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + <uint64_t>0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double to_unit(uint64_t h) noexcept nogil:
    return (<double>(h >> 11) + 0.5) * INV53


def uniform_field(row_keys, Py_ssize_t row_bits):
    cdef const uint64_t[:] keys = np.ascontiguousarray(row_keys, dtype=np.uint64)
    cdef Py_ssize_t n_rows = keys.shape[0], r, c
    out = np.empty(n_rows * row_bits, dtype=np.float64)
    cdef double[:] o = out
    with nogil:
        for r in range(n_rows):
            for c in range(row_bits):
                o[r * row_bits + c] = to_unit(splitmix64(keys[r] ^ <uint64_t>c))
    return out


def normal_field(row_keys, Py_ssize_t row_bits, double mean, double sd):
    cdef const uint64_t[:] keys = np.ascontiguousarray(row_keys, dtype=np.uint64)
    cdef Py_ssize_t n_rows = keys.shape[0], r, c
    out = np.empty(n_rows * row_bits, dtype=np.float64)
    cdef double[:] o = out
    with nogil:
        for r in range(n_rows):
            for c in range(row_bits):
                o[r * row_bits + c] = mean + sd * ndtri(
                    to_unit(splitmix64(keys[r] ^ <uint64_t>c)))
    return out


def flip_kernel(row_keys, Py_ssize_t row_bits, retention_log, hammer_rate,
                charged, double noise_sd, double temp_factor, double inv_time):
    cdef const uint64_t[:] keys = np.ascontiguousarray(row_keys, dtype=np.uint64)
    cdef const double[:] lr = np.ascontiguousarray(retention_log, dtype=np.float64)
    cdef const double[:] hr = np.ascontiguousarray(hammer_rate, dtype=np.float64)
    cdef const uint8_t[:] ch = np.ascontiguousarray(charged, dtype=np.uint8)
    cdef Py_ssize_t n_rows = keys.shape[0], r, c, i
    cdef double log_r
    out = np.zeros(n_rows * row_bits, dtype=np.uint8)
    cdef uint8_t[:] o = out
    with nogil:
        for r in range(n_rows):
            for c in range(row_bits):
                i = r * row_bits + c
                if not ch[i]:
                    continue
                log_r = lr[i]
                if noise_sd > 0.0:
                    log_r = log_r + noise_sd * ndtri(
                        to_unit(splitmix64(keys[r] ^ <uint64_t>c)))
                if temp_factor * exp(-log_r) + hr[i] >= inv_time:
                    o[i] = 1
    return out

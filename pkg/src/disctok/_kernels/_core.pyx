# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: nearest-centroid assignment, Lloyd accumulation,
and fixed-width LSB-first bit packing."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def assign_tokens(const float[:, ::1] frames, const double[:, ::1] centroids):
    """Nearest centroid per frame (squared Euclidean, ties to smaller index)."""
    cdef Py_ssize_t n = frames.shape[0]
    cdef Py_ssize_t d = frames.shape[1]
    cdef Py_ssize_t k = centroids.shape[0]
    out = np.empty(n, dtype=np.int32)
    cdef int[::1] labels = out
    cdef Py_ssize_t i, j, c
    cdef double best, ssd, diff
    cdef int best_c
    for i in range(n):
        best = INFINITY
        best_c = 0
        for c in range(k):
            ssd = 0.0
            for j in range(d):
                diff = <double>frames[i, j] - centroids[c, j]
                ssd += diff * diff
            if ssd < best:
                best = ssd
                best_c = <int>c
        labels[i] = best_c
    return out


def assign_accumulate(const float[:, ::1] frames, const double[:, ::1] centroids):
    """One Lloyd pass over a chunk: labels, per-cluster sums/counts, inertia."""
    cdef Py_ssize_t n = frames.shape[0]
    cdef Py_ssize_t d = frames.shape[1]
    cdef Py_ssize_t k = centroids.shape[0]
    labels_arr = np.empty(n, dtype=np.int32)
    sums_arr = np.zeros((k, d), dtype=np.float64)
    counts_arr = np.zeros(k, dtype=np.int64)
    cdef int[::1] labels = labels_arr
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t i, j, c
    cdef double best, ssd, diff, inertia = 0.0
    cdef int best_c
    for i in range(n):
        best = INFINITY
        best_c = 0
        for c in range(k):
            ssd = 0.0
            for j in range(d):
                diff = <double>frames[i, j] - centroids[c, j]
                ssd += diff * diff
            if ssd < best:
                best = ssd
                best_c = <int>c
        labels[i] = best_c
        counts[best_c] += 1
        inertia += best
        for j in range(d):
            sums[best_c, j] += <double>frames[i, j]
    return labels_arr, sums_arr, counts_arr, inertia


def pack_bits(const cnp.uint64_t[::1] tokens, int bit_width):
    """Pack ids into an LSB-first little-endian bitstream (zero padding)."""
    cdef Py_ssize_t n = tokens.shape[0]
    cdef Py_ssize_t nbytes = (n * bit_width + 7) // 8
    out = np.zeros(nbytes, dtype=np.uint8)
    cdef unsigned char[::1] buf = out
    cdef unsigned long long acc = 0
    cdef int nbits = 0
    cdef Py_ssize_t i, pos = 0
    for i in range(n):
        acc |= tokens[i] << nbits
        nbits += bit_width
        while nbits >= 8:
            buf[pos] = <unsigned char>(acc & 0xFF)
            acc >>= 8
            nbits -= 8
            pos += 1
    if nbits > 0:
        buf[pos] = <unsigned char>(acc & 0xFF)
    return out.tobytes()


def unpack_bits(const unsigned char[::1] payload, int bit_width, Py_ssize_t n):
    """Inverse of pack_bits. Returns (ids, padding_clean)."""
    out = np.empty(n, dtype=np.uint64)
    cdef cnp.uint64_t[::1] tokens = out
    cdef unsigned long long acc = 0, mask = (<unsigned long long>1 << bit_width) - 1
    cdef int nbits = 0
    cdef Py_ssize_t i, pos = 0
    for i in range(n):
        while nbits < bit_width:
            acc |= <unsigned long long>payload[pos] << nbits
            nbits += 8
            pos += 1
        tokens[i] = acc & mask
        acc >>= bit_width
        nbits -= bit_width
    # padding bits in the final byte must be zero
    return out, acc == 0

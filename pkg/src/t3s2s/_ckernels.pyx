# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring ``t3s2s._pykernels`` bit for bit."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def topk_indices(const double[:, :] V, Py_ssize_t K, Py_ssize_t i_end):
    cdef Py_ssize_t dh = V.shape[1]
    cdef Py_ssize_t j, i, k, pos
    cdef double m
    out = np.empty((dh, K), dtype=np.int64)
    cdef cnp.int64_t[:, :] Y = out
    best = np.empty(K, dtype=np.float64)
    cdef double[:] bm = best
    cdef Py_ssize_t filled
    for j in range(dh):
        filled = 0
        for i in range(1, i_end):
            m = fabs(V[i, j])
            # rows arrive in ascending order, so strict > keeps earlier ties ahead
            if filled == K and not (m > bm[K - 1]):
                continue
            pos = filled if filled < K else K - 1
            while pos > 0 and m > bm[pos - 1]:
                if pos < K:
                    bm[pos] = bm[pos - 1]
                    Y[j, pos] = Y[j, pos - 1]
                pos -= 1
            bm[pos] = m
            Y[j, pos] = i
            if filled < K:
                filled += 1
    return out


def characteristics_mask(const cnp.int64_t[:, :] Y, const cnp.int64_t[:] slot,
                         const cnp.uint8_t[:, :] masks):
    cdef Py_ssize_t dh = Y.shape[0], K = Y.shape[1], b = masks.shape[1]
    cdef Py_ssize_t j, k, p
    cdef cnp.int64_t s
    out = np.zeros((b, dh), dtype=np.int32)
    cdef cnp.int32_t[:, :] H = out
    for j in range(dh):
        for k in range(K):
            s = slot[Y[j, k]]
            if s < 0:
                continue
            for p in range(b):
                H[p, j] += masks[s, p]
    return out


def prominence(const double[:, :] F, const cnp.int32_t[:, :] H, double beta):
    cdef Py_ssize_t b = F.shape[0], dh = F.shape[1], p, j
    out = np.empty((b, dh), dtype=np.float64)
    cdef double[:, :] G = out
    for p in range(b):
        for j in range(dh):
            G[p, j] = F[p, j] * (1.0 + beta * <double>H[p, j])
    return out


def dense_tune(const double[:, :] logits, const cnp.int64_t[:] cols,
               const cnp.uint8_t[:, :] masks, const double[:] coef):
    cdef Py_ssize_t b = logits.shape[0], k, p
    cdef cnp.int64_t t
    cdef double c, hi, lo, v, delta
    out = np.array(logits, dtype=np.float64, copy=True)
    cdef double[:, :] L = out
    for k in range(cols.shape[0]):
        c = coef[k]
        if c == 0.0:
            continue
        t = cols[k]
        hi = logits[0, t]
        lo = logits[0, t]
        for p in range(1, b):
            v = logits[p, t]
            if v > hi:
                hi = v
            if v < lo:
                lo = v
        for p in range(b):
            v = logits[p, t]
            if masks[k, p] != 0:
                delta = hi - v
            else:
                delta = -(v - lo)
            v = v + c * delta
            if v > hi:
                v = hi
            elif v < lo:
                v = lo
            L[p, t] = v
    return out

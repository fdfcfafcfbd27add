# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see reference.py for the contract."""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint32_t M0 = 0xD2511F53u
cdef uint32_t M1 = 0xCD9E8D57u
cdef uint32_t W0 = 0x9E3779B9u
cdef uint32_t W1 = 0xBB67AE85u


cdef inline uint64_t philox_cell(uint32_t c0, uint32_t c1, uint32_t c2,
                                 uint32_t c3, uint32_t key0, uint32_t key1) nogil:
    cdef uint32_t x0 = c0, x1 = c1, x2 = c2, x3 = c3
    cdef uint32_t k0 = key0, k1 = key1
    cdef uint64_t p0, p1
    cdef uint32_t y0, y1, y2, y3
    cdef int r
    for r in range(10):
        p0 = <uint64_t> M0 * x0
        p1 = <uint64_t> M1 * x2
        y0 = <uint32_t> (p1 >> 32) ^ x1 ^ k0
        y1 = <uint32_t> p1
        y2 = <uint32_t> (p0 >> 32) ^ x3 ^ k1
        y3 = <uint32_t> p0
        x0 = y0; x1 = y1; x2 = y2; x3 = y3
        k0 = k0 + W0
        k1 = k1 + W1
    return (<uint64_t> x0 << 32) | x1


def philox_bits(seed, stream, n_key, num_particles, num_steps, num_components):
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if not 0 <= stream < 1 << 16:
        raise ValueError("stream tag out of range")
    if not 0 <= num_components < 1 << 16:
        raise ValueError("component count out of range")
    cdef uint32_t key0 = seed & 0xFFFFFFFF
    cdef uint32_t key1 = seed >> 32
    cdef uint32_t c3 = n_key & 0xFFFFFFFF
    cdef uint32_t sbits = <uint32_t> stream << 16
    cdef Py_ssize_t np_ = num_particles, ns = num_steps, nc = num_components
    out = np.empty((np_, ns, nc), dtype=np.uint64)
    cdef uint64_t[:, :, ::1] o = out
    cdef Py_ssize_t i, k, v
    with nogil:
        for i in range(np_):
            for k in range(ns):
                for v in range(nc):
                    o[i, k, v] = philox_cell(<uint32_t> v | sbits, <uint32_t> k,
                                             <uint32_t> i, c3, key0, key1)
    return out


def fused_euler_update(double[:, ::1] states, double[:, ::1] drift,
                       double[:, :, ::1] sig, double[:, :, ::1] sig0,
                       double[:, ::1] d_w, double[::1] d_w0,
                       double h, double[::1] denom):
    cdef Py_ssize_t n_p = states.shape[0], d = states.shape[1]
    cdef Py_ssize_t m = sig.shape[2], m0 = sig0.shape[2]
    out = np.empty((n_p, d))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, u, v
    cdef double acc, s, den
    with nogil:
        for i in range(n_p):
            den = denom[i]
            for u in range(d):
                acc = states[i, u] + (drift[i, u] / den) * h
                if m:
                    s = 0.0
                    for v in range(m):
                        s += (sig[i, u, v] / den) * d_w[i, v]
                    acc += s
                if m0:
                    s = 0.0
                    for v in range(m0):
                        s += (sig0[i, u, v] / den) * d_w0[v]
                    acc += s
                o[i, u] = acc
    return out


def milstein_lambda(double[:, :, :, ::1] dsig, double[:, :, :, ::1] dsig0,
                    double[:, :, ::1] sigt, double[:, :, ::1] sig0t,
                    double[:, :, ::1] i_ii, double[:, :, ::1] i_0i,
                    double[:, :, ::1] i_i0, double[:, ::1] i_00):
    cdef Py_ssize_t n_p = dsig.shape[0], d = dsig.shape[1]
    cdef Py_ssize_t m = sigt.shape[2], m0 = sig0t.shape[2]
    out = np.zeros((n_p, d))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, u, v, k, w
    cdef double s
    with nogil:
        for i in range(n_p):
            for u in range(d):
                if m:
                    s = 0.0
                    for v in range(m):
                        for k in range(d):
                            for w in range(m):
                                s += dsig[i, u, v, k] * sigt[i, k, w] * i_ii[i, w, v]
                    o[i, u] += s
                if m and m0:
                    s = 0.0
                    for v in range(m):
                        for k in range(d):
                            for w in range(m0):
                                s += dsig[i, u, v, k] * sig0t[i, k, w] * i_0i[i, w, v]
                    o[i, u] += s
                    s = 0.0
                    for v in range(m0):
                        for k in range(d):
                            for w in range(m):
                                s += dsig0[i, u, v, k] * sigt[i, k, w] * i_i0[i, w, v]
                    o[i, u] += s
                if m0:
                    s = 0.0
                    for v in range(m0):
                        for k in range(d):
                            for w in range(m0):
                                s += dsig0[i, u, v, k] * sig0t[i, k, w] * i_00[w, v]
                    o[i, u] += s
    return out

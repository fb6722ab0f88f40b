# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-block sum-product kernel.

Same flooding schedule, clamps and prefix/suffix exclusion order as the
numpy fallback, so the two backends agree on decisions.
"""

from libc.math cimport tanh, atanh

import numpy as np

BACKEND = "cython"

cdef double LLR_CLAMP = 30.0
cdef double ATANH_LIMIT = 1.0 - 1e-15


def bp_decode_batch(object llrs_in, object edge_var_in, object check_edges_in,
                    object var_edges_in, int max_iters):
    """Decode a batch of LLR rows; see the numpy kernel for the contract."""
    llrs_arr = np.clip(np.asarray(llrs_in, dtype=np.float64), -LLR_CLAMP, LLR_CLAMP)
    llrs_arr = np.ascontiguousarray(llrs_arr)
    cdef double[:, ::1] llrs = llrs_arr
    cdef int[:, ::1] ce = np.ascontiguousarray(check_edges_in, dtype=np.int32)
    cdef int[::1] ev = np.ascontiguousarray(edge_var_in, dtype=np.int32)
    cdef int[:, ::1] ve = np.ascontiguousarray(var_edges_in, dtype=np.int32)

    cdef Py_ssize_t bsz = llrs.shape[0]
    cdef Py_ssize_t n = llrs.shape[1]
    cdef Py_ssize_t m = ce.shape[0]
    cdef Py_ssize_t d_max = ce.shape[1]
    cdef Py_ssize_t n_edges = ev.shape[0]

    out_bits_arr = np.zeros((bsz, n), dtype=np.uint8)
    out_conv_arr = np.zeros(bsz, dtype=np.uint8)
    out_iters_arr = np.full(bsz, max_iters, dtype=np.int32)
    cdef unsigned char[:, ::1] out_bits = out_bits_arr
    cdef unsigned char[::1] out_conv = out_conv_arr
    cdef int[::1] out_iters = out_iters_arr

    deg_arr = np.zeros(m, dtype=np.int32)
    cdef int[::1] deg = deg_arr
    cdef Py_ssize_t b, it, c, i, e, v, d
    for c in range(m):
        i = 0
        while i < d_max and ce[c, i] >= 0:
            i += 1
        deg[c] = <int> i

    cdef double[::1] v2c = np.empty(n_edges)
    cdef double[::1] c2v = np.empty(n_edges)
    cdef double[::1] totals = np.empty(n)
    cdef double[::1] tv = np.empty(d_max)
    cdef double[::1] fwd = np.empty(d_max)
    cdef double[::1] bwd = np.empty(d_max)

    cdef double s, x, f, g, tot
    cdef int parity, ok, definite, conv

    for b in range(bsz):
        for e in range(n_edges):
            v2c[e] = llrs[b, ev[e]]
        conv = 0
        for it in range(1, max_iters + 1):
            for c in range(m):
                d = deg[c]
                for i in range(d):
                    x = v2c[ce[c, i]]
                    if x > LLR_CLAMP:
                        x = LLR_CLAMP
                    elif x < -LLR_CLAMP:
                        x = -LLR_CLAMP
                    tv[i] = tanh(0.5 * x)
                f = 1.0
                for i in range(d):
                    f = f * tv[i]
                    fwd[i] = f
                g = 1.0
                for i in range(d - 1, -1, -1):
                    g = g * tv[i]
                    bwd[i] = g
                for i in range(d):
                    x = 1.0
                    if i >= 1:
                        x = x * fwd[i - 1]
                    if i <= d - 2:
                        x = x * bwd[i + 1]
                    if x > ATANH_LIMIT:
                        x = ATANH_LIMIT
                    elif x < -ATANH_LIMIT:
                        x = -ATANH_LIMIT
                    c2v[ce[c, i]] = 2.0 * atanh(x)
            definite = 1
            for v in range(n):
                s = c2v[ve[v, 0]]
                s = s + c2v[ve[v, 1]]
                s = s + c2v[ve[v, 2]]
                tot = llrs[b, v] + s
                totals[v] = tot
                if tot == 0.0:
                    definite = 0
            ok = 1
            for c in range(m):
                parity = 0
                d = deg[c]
                for i in range(d):
                    if totals[ev[ce[c, i]]] < 0.0:
                        parity ^= 1
                if parity:
                    ok = 0
                    break
            if ok and definite:
                conv = 1
                out_iters[b] = <int> it
                break
            if it < max_iters:
                for e in range(n_edges):
                    v2c[e] = totals[ev[e]] - c2v[e]
        for v in range(n):
            out_bits[b, v] = 1 if totals[v] < 0.0 else 0
        out_conv[b] = conv

    return out_bits_arr, out_conv_arr.astype(bool), out_iters_arr

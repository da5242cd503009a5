# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled attention kernels.

Same contracts as hpnet.kernels.reference; plain C loops over contiguous
float64 buffers. Single-threaded on purpose: forward results must be
reproducible bit-for-bit between runs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()

BACKEND = "native"

from hpnet.kernels.reference import EmptyKeyRowError


def sdpa_forward(q, k, v, mask, double scale, bint allow_empty=False):
    cdef double[:, :, :, ::1] qv = np.ascontiguousarray(q)
    cdef double[:, :, :, ::1] kv = np.ascontiguousarray(k)
    cdef double[:, :, :, ::1] vv = np.ascontiguousarray(v)
    cdef cnp.uint8_t[:, ::1] mv = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t B = qv.shape[0], Q = qv.shape[1], H = qv.shape[2], Dh = qv.shape[3]
    cdef Py_ssize_t S = kv.shape[1]
    out_arr = np.zeros((B, Q, H, Dh), dtype=np.float64)
    probs_arr = np.zeros((B, Q, H, S), dtype=np.float64)
    cdef double[:, :, :, ::1] ov = out_arr
    cdef double[:, :, :, ::1] pv = probs_arr
    cdef Py_ssize_t b, qi, h, s, d
    cdef double acc, top, denom, w
    cdef bint any_key

    for b in range(B):
        any_key = False
        for s in range(S):
            if mv[b, s]:
                any_key = True
                break
        if not any_key:
            if not allow_empty:
                raise EmptyKeyRowError(f"all keys masked for query row {b}")
            continue
        for qi in range(Q):
            for h in range(H):
                top = -INFINITY
                for s in range(S):
                    if mv[b, s]:
                        acc = 0.0
                        for d in range(Dh):
                            acc += qv[b, qi, h, d] * kv[b, s, h, d]
                        acc *= scale
                        pv[b, qi, h, s] = acc
                        if acc > top:
                            top = acc
                denom = 0.0
                for s in range(S):
                    if mv[b, s]:
                        w = exp(pv[b, qi, h, s] - top)
                        pv[b, qi, h, s] = w
                        denom += w
                for s in range(S):
                    if mv[b, s]:
                        w = pv[b, qi, h, s] / denom
                        pv[b, qi, h, s] = w
                        for d in range(Dh):
                            ov[b, qi, h, d] += w * vv[b, s, h, d]
    return out_arr, probs_arr


def sdpa_backward(g_out, probs, q, k, v, double scale):
    cdef double[:, :, :, ::1] gv_out = np.ascontiguousarray(g_out)
    cdef double[:, :, :, ::1] pv = np.ascontiguousarray(probs)
    cdef double[:, :, :, ::1] qv = np.ascontiguousarray(q)
    cdef double[:, :, :, ::1] kv = np.ascontiguousarray(k)
    cdef double[:, :, :, ::1] vv = np.ascontiguousarray(v)
    cdef Py_ssize_t B = qv.shape[0], Q = qv.shape[1], H = qv.shape[2], Dh = qv.shape[3]
    cdef Py_ssize_t S = kv.shape[1]
    gq_arr = np.zeros((B, Q, H, Dh), dtype=np.float64)
    gk_arr = np.zeros((B, S, H, Dh), dtype=np.float64)
    gv_arr = np.zeros((B, S, H, Dh), dtype=np.float64)
    cdef double[:, :, :, ::1] gq = gq_arr
    cdef double[:, :, :, ::1] gk = gk_arr
    cdef double[:, :, :, ::1] gvv = gv_arr
    cdef Py_ssize_t b, qi, h, s, d
    cdef double inner, gp, gs

    for b in range(B):
        for qi in range(Q):
            for h in range(H):
                inner = 0.0
                for s in range(S):
                    if pv[b, qi, h, s] != 0.0:
                        gp = 0.0
                        for d in range(Dh):
                            gp += gv_out[b, qi, h, d] * vv[b, s, h, d]
                        inner += gp * pv[b, qi, h, s]
                for s in range(S):
                    if pv[b, qi, h, s] == 0.0:
                        continue
                    gp = 0.0
                    for d in range(Dh):
                        gp += gv_out[b, qi, h, d] * vv[b, s, h, d]
                        gvv[b, s, h, d] += pv[b, qi, h, s] * gv_out[b, qi, h, d]
                    gs = pv[b, qi, h, s] * (gp - inner) * scale
                    for d in range(Dh):
                        gq[b, qi, h, d] += gs * kv[b, s, h, d]
                        gk[b, s, h, d] += gs * qv[b, qi, h, d]
    return gq_arr, gk_arr, gv_arr


def scatter_add_rows(grad, idx, Py_ssize_t num_rows):
    cdef double[:, ::1] gv = np.ascontiguousarray(grad)
    cdef cnp.int64_t[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t E = gv.shape[0], D = gv.shape[1]
    out_arr = np.zeros((num_rows, D), dtype=np.float64)
    cdef double[:, ::1] ov = out_arr
    cdef Py_ssize_t e, d, r
    for e in range(E):
        r = iv[e]
        for d in range(D):
            ov[r, d] += gv[e, d]
    return out_arr

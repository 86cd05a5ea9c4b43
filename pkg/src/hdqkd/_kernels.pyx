# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pulse kernels; same signatures and results as _kernels_py."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def classify_eve(e, p):
    cdef const double[:, ::1] ev = np.ascontiguousarray(e, dtype=np.float64)
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = ev.shape[0], m = ev.shape[1], i, k
    basis = np.empty(n, dtype=np.uint8)
    signs = np.empty((n, m), dtype=np.uint8)
    cdef unsigned char[::1] bv = basis
    cdef unsigned char[:, ::1] sv = signs
    cdef double x2, y2
    with nogil:
        for i in range(n):
            x2 = 0.0
            y2 = 0.0
            for k in range(m):
                x2 += ev[i, k] * ev[i, k]
                y2 += pv[i, k] * pv[i, k]
            if x2 >= y2:
                bv[i] = 0
                for k in range(m):
                    sv[i, k] = ev[i, k] < 0
            else:
                bv[i] = 1
                for k in range(m):
                    sv[i, k] = pv[i, k] < 0
    return basis, signs


def orthant_tally(e, p):
    cdef const double[:, ::1] ev = np.ascontiguousarray(e, dtype=np.float64)
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = ev.shape[0], m = ev.shape[1], i, k
    cdef Py_ssize_t n_patterns = 1 << m
    counts = np.zeros(n_patterns + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] cv = counts
    cdef double x2, y2
    cdef Py_ssize_t idx
    with nogil:
        for i in range(n):
            x2 = 0.0
            y2 = 0.0
            for k in range(m):
                x2 += ev[i, k] * ev[i, k]
                y2 += pv[i, k] * pv[i, k]
            if x2 >= y2:
                idx = 0
                for k in range(m):
                    idx = (idx << 1) | (ev[i, k] < 0)
                cv[idx] += 1
            else:
                cv[n_patterns] += 1
    return counts


def score_bob(x, thresholds, ref_signs, keep, group):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef const unsigned char[:, ::1] rv = np.ascontiguousarray(ref_signs, dtype=np.uint8)
    cdef const unsigned char[::1] kv = np.ascontiguousarray(keep, dtype=np.uint8)
    cdef const unsigned char[::1] gv = np.ascontiguousarray(group, dtype=np.uint8)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1], i, k, g
    out = np.zeros((2, 3 + m), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] ov = out
    cdef bint passed, any_wrong, wrong
    with nogil:
        for i in range(n):
            if not kv[i]:
                continue
            g = gv[i]
            ov[g, 0] += 1
            passed = True
            for k in range(m):
                if xv[i, k] < tv[k] and xv[i, k] > -tv[k]:
                    passed = False
                    break
            if not passed:
                continue
            ov[g, 1] += 1
            any_wrong = False
            for k in range(m):
                wrong = (xv[i, k] < 0) != (rv[i, k] != 0)
                if wrong:
                    ov[g, 3 + k] += 1
                    any_wrong = True
            if any_wrong:
                ov[g, 2] += 1
    return out

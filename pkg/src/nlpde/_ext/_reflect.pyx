# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled reflection kernels; see the package docstring for the contract."""
import numpy as np
from libc.math cimport fmod, INFINITY


def reflect_batch(const double[:, ::1] a, const double[:, ::1] b,
                  const double[::1] lower, const double[::1] upper, long max_bounces):
    cdef Py_ssize_t n = b.shape[0], d = b.shape[1]
    out_arr = np.array(b, dtype=np.float64, copy=True)
    counts_arr = np.zeros(n, dtype=np.int64)
    start_arr = np.empty(d, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef long long[::1] counts = counts_arr
    cdef double[::1] s = start_arr
    cdef Py_ssize_t p, i, best
    cdef double r, best_r, face, best_face, delta, c
    cdef long k
    for p in range(n):
        for i in range(d):
            s[i] = a[p, i]
        k = 0
        while True:
            best = -1
            best_r = INFINITY
            best_face = 0.0
            for i in range(d):
                if out[p, i] > upper[i]:
                    face = upper[i]
                elif out[p, i] < lower[i]:
                    face = lower[i]
                else:
                    continue
                r = (face - s[i]) / (out[p, i] - s[i])
                if r < best_r:
                    best_r = r
                    best = i
                    best_face = face
            if best < 0:
                break
            if k >= max_bounces:
                counts[p] = k
                return out_arr, counts_arr, p
            if best_r < 0.0:
                best_r = 0.0
            elif best_r > 1.0:
                best_r = 1.0
            for i in range(d):
                delta = out[p, i] - s[i]
                c = s[i] + best_r * delta
                if c < lower[i]:
                    c = lower[i]
                elif c > upper[i]:
                    c = upper[i]
                s[i] = c
            s[best] = best_face
            out[p, best] = 2.0 * best_face - out[p, best]
            k += 1
        counts[p] = k
    return out_arr, counts_arr, -1


def fold_batch(const double[:, ::1] b, const double[::1] lower, const double[::1] upper):
    cdef Py_ssize_t n = b.shape[0], d = b.shape[1]
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t p, i
    cdef double w, y
    for p in range(n):
        for i in range(d):
            w = upper[i] - lower[i]
            y = fmod(b[p, i] - lower[i], 2.0 * w)
            if y < 0.0:
                y += 2.0 * w
            if y > w:
                y = 2.0 * w - y
            out[p, i] = lower[i] + y
    return out_arr

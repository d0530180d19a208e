# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled lower-envelope pass for the exact squared Euclidean distance transform."""

from cython.parallel cimport prange
from libc.stdlib cimport malloc, free
from libc.math cimport INFINITY

import numpy as np
cimport numpy as cnp

ctypedef cnp.int64_t i64

cdef i64 _INF = np.iinfo(np.int64).max // 4


cdef void _line(const i64* f, const i64* src, i64* fout, i64* sout,
                Py_ssize_t n, Py_ssize_t* v, double* z) noexcept nogil:
    cdef Py_ssize_t q, k = -1, vk
    cdef double s
    for q in range(n):
        if f[q] >= _INF:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -INFINITY
            z[1] = INFINITY
            continue
        while True:
            vk = v[k]
            s = (<double>(f[q] + q * q) - <double>(f[vk] + vk * vk)) / (2.0 * (q - vk))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = INFINITY
    if k < 0:
        for q in range(n):
            fout[q] = _INF
            sout[q] = -1
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        vk = v[k]
        fout[q] = (q - vk) * (q - vk) + f[vk]
        sout[q] = src[vk]


def lower_envelope_lines(const i64[:, ::1] f, const i64[:, ::1] src,
                         i64[:, ::1] fout, i64[:, ::1] sout, int num_threads=1):
    """Run the 1-D lower-envelope pass on every row of ``f`` (in lattice units)."""
    cdef Py_ssize_t nlines = f.shape[0], n = f.shape[1], i
    cdef Py_ssize_t* v
    cdef double* z
    if n == 0 or nlines == 0:
        return
    if num_threads < 1:
        num_threads = 1
    for i in prange(nlines, nogil=True, num_threads=num_threads, schedule="static"):
        v = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
        z = <double*> malloc((n + 1) * sizeof(double))
        _line(&f[i, 0], &src[i, 0], &fout[i, 0], &sout[i, 0], n, v, z)
        free(v)
        free(z)

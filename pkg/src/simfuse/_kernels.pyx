# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels for the exhaustive fused-search loop.

Single-pass, allocation-free counterparts of ``_kernels_py``; all loops
release the GIL so block workers run concurrently under threading.
"""

def accumulate(double[:, ::1] acc, float[:, ::1] mat, int sign):
    """acc += sign * mat, accumulating float32 into float64 in place."""
    cdef Py_ssize_t n = acc.shape[0], m = acc.shape[1]
    cdef Py_ssize_t i, j
    with nogil:
        if sign > 0:
            for i in range(n):
                for j in range(m):
                    acc[i, j] += <double> mat[i, j]
        else:
            for i in range(n):
                for j in range(m):
                    acc[i, j] -= <double> mat[i, j]


def accumulate_norm(double[:, ::1] acc, float[:, ::1] mat,
                    double mean, double inv_std, int sign):
    """acc += sign * ((mat - mean) * inv_std) in float64, in place."""
    cdef Py_ssize_t n = acc.shape[0], m = acc.shape[1]
    cdef Py_ssize_t i, j
    cdef double term
    with nogil:
        if sign > 0:
            for i in range(n):
                for j in range(m):
                    term = (<double> mat[i, j] - mean) * inv_std
                    acc[i, j] += term
        else:
            for i in range(n):
                for j in range(m):
                    term = (<double> mat[i, j] - mean) * inv_std
                    acc[i, j] -= term


def count_hits(double[:, ::1] acc, Py_ssize_t k, unsigned char[::1] hits):
    """Per-row hit flags for recall@k of the fused matrix.

    Row i hits when fewer than k entries are strictly greater than the
    diagonal or tie with it at a smaller index.
    """
    cdef Py_ssize_t n = acc.shape[0]
    cdef Py_ssize_t i, j, rank
    cdef double truth
    cdef long total = 0
    with nogil:
        for i in range(n):
            truth = acc[i, i]
            rank = 0
            # Entries before the diagonal also count on ties (smaller index
            # wins); entries after it only count when strictly greater.
            for j in range(i):
                if acc[i, j] >= truth:
                    rank += 1
            for j in range(i + 1, n):
                if acc[i, j] > truth:
                    rank += 1
            if rank < k:
                hits[i] = 1
                total += 1
            else:
                hits[i] = 0
    return total

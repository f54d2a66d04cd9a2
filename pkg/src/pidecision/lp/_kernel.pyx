# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simplex pivot loop; see ``_kernel_py`` for the reference semantics."""

cdef enum:
    OPTIMAL = 0
    UNBOUNDED = 1
    ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef Py_ssize_t nrow = T.shape[0], ncol = T.shape[1]
    cdef double piv = T[r, j]
    cdef double f
    for k in range(ncol):
        T[r, k] = T[r, k] / piv
    for i in range(nrow):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for k in range(ncol):
                T[i, k] = T[i, k] - f * T[r, k]
        T[i, j] = 0.0
    T[r, j] = 1.0


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t j):
    _pivot(T, r, j)


def pivot_loop(double[:, ::1] T, long[::1] basis, Py_ssize_t ncols,
               Py_ssize_t max_iter, double tol):
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef Py_ssize_t it = 0, i, j, r
    cdef double best, ratio
    cdef int status = ITERATION_LIMIT
    with nogil:
        while it < max_iter:
            j = -1
            for i in range(ncols):
                if T[m, i] < -tol:
                    j = i
                    break
            if j < 0:
                status = OPTIMAL
                break
            best = 0.0
            r = -1
            for i in range(m):
                if T[i, j] > tol:
                    ratio = T[i, rhs] / T[i, j]
                    if r < 0 or ratio < best:
                        best = ratio
                        r = i
            if r < 0:
                status = UNBOUNDED
                break
            r = -1
            for i in range(m):
                if T[i, j] > tol:
                    ratio = T[i, rhs] / T[i, j]
                    if ratio <= best + tol and (r < 0 or basis[i] < basis[r]):
                        r = i
            _pivot(T, r, j)
            basis[r] = j
            it += 1
    return status, it

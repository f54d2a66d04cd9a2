"""Pure-Python (numpy) simplex pivot loop.

Mirrors ``_kernel.pyx`` operation for operation so both backends produce
bit-identical tableaus.
"""
import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


def pivot(T, r, j):
    """Pivot tableau ``T`` in place on row ``r``, column ``j``."""
    T[r] /= T[r, j]
    f = T[:, j].copy()
    f[r] = 0.0
    T -= np.outer(f, T[r])
    T[:, j] = 0.0
    T[r, j] = 1.0


def pivot_loop(T, basis, ncols, max_iter, tol):
    """Run Bland-rule primal simplex iterations on a canonical tableau.

    ``T`` has constraint rows ``0..m-1`` and the reduced-cost row last; the
    last column holds the right-hand side. Only columns ``< ncols`` may enter.
    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        cand = np.flatnonzero(T[m, :ncols] < -tol)
        if cand.size == 0:
            return OPTIMAL, it
        j = int(cand[0])
        col = T[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol]
        r = int(tied[np.argmin(basis[tied])])
        pivot(T, r, j)
        basis[r] = j
    return ITERATION_LIMIT, max_iter

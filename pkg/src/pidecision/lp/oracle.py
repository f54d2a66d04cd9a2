"""Brute-force vertex enumeration, used as an independent check on ``solve``.

Only meaningful for small, bounded problems: every basic feasible solution
is formed from a column subset of size ``rank(A)`` and the best is kept.
"""
from itertools import combinations

import numpy as np

from .solver import LinearProgram


def basic_feasible_solutions(A, b, tol=1e-9):
    """Yield every basic feasible solution of ``A x = b, x >= 0``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    r = np.linalg.matrix_rank(A)
    seen = set()
    for cols in combinations(range(n), r):
        B = A[:, cols]
        if np.linalg.matrix_rank(B) < r:
            continue
        xs, *_ = np.linalg.lstsq(B, b, rcond=None)
        if np.abs(B @ xs - b).max() > tol or (xs < -tol).any():
            continue
        x = np.zeros(n)
        x[list(cols)] = np.maximum(xs, 0.0)
        key = tuple(np.round(x, 9))
        if key not in seen:
            seen.add(key)
            yield x


def vertex_enumeration(lp: LinearProgram):
    """Return ``(status, value, point)`` by exhaustive vertex search.

    The status is ``"optimal"`` or ``"infeasible"``; unboundedness is not
    detected, so callers must pass bounded problems.
    """
    best_val, best_x = None, None
    for x in basic_feasible_solutions(lp.eq_matrix, lp.eq_rhs):
        v = float(lp.objective @ x)
        if best_val is None or (v < best_val if lp.sense == "min" else v > best_val):
            best_val, best_x = v, x
    if best_val is None:
        return "infeasible", float("nan"), None
    return "optimal", best_val, best_x

"""Two-phase primal simplex for equality-form linear programs.

Problems have the form ``min/max c @ x  s.t.  A @ x = b, x >= 0``. The hot
pivot loop lives in a compiled kernel when available (see ``_backend``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
MAX_ITER = 100_000


class LpError(RuntimeError):
    """Raised when the simplex cannot finish (iteration cap hit)."""


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float))
        b = np.asarray(self.eq_rhs, dtype=float).ravel()
        if A.shape != (b.size, c.size):
            raise ValueError(
                f"inconsistent LP dimensions: A {A.shape}, b {b.size}, c {c.size}"
            )
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if not (np.isfinite(c).all() and np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "eq_matrix", A)
        object.__setattr__(self, "eq_rhs", b)


@dataclass(frozen=True)
class LpSolution:
    status: str
    value: float
    point: np.ndarray
    iterations: int
    duals: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    # dual objective y @ b reconstructed from the final basis
    dual_value: float = float("nan")
    backend: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve(lp: LinearProgram, *, backend: str | None = None, max_iter: int = MAX_ITER) -> LpSolution:
    """Solve ``lp``; a maximization is solved as the negated minimization."""
    if lp.sense == "max":
        neg = LinearProgram(-lp.objective, lp.eq_matrix, lp.eq_rhs, "min")
        sol = solve(neg, backend=backend, max_iter=max_iter)
        return LpSolution(
            sol.status, -sol.value, sol.point, sol.iterations, -sol.duals,
            -sol.dual_value, sol.backend,
        )

    kernel = _backend.get_kernel(backend)
    c, A, b = lp.objective, lp.eq_matrix, lp.eq_rhs
    m, n = A.shape
    if m == 0:
        return _finish_trivial(c, n, kernel.name)

    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign

    # phase 1: artificials in columns n..n+m-1
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = As
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = bs
    T[m, :n] = -As.sum(axis=0)
    T[m, -1] = -bs.sum()
    basis = np.arange(n, n + m, dtype=np.int64)

    status, it1 = kernel.pivot_loop(T, basis, n, max_iter, PIVOT_TOL)
    if status == _backend.ITERATION_LIMIT:
        raise LpError(f"phase 1 hit the iteration cap {max_iter}; basis={basis.tolist()}")
    infeas = -T[m, -1]
    if infeas > FEAS_TOL * (1.0 + np.abs(bs).max()):
        return _failed("infeasible", n, it1, kernel.name)

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= n:
            row = np.abs(T[i, :n])
            j = int(np.argmax(row))
            if row[j] > PIVOT_TOL:
                kernel.pivot(T, i, j)
                basis[i] = j
                keep.append(i)
        else:
            keep.append(i)
    rows = keep + [m]
    T2 = np.ascontiguousarray(np.hstack([T[rows, :n], T[rows, -1:]]))
    basis = np.ascontiguousarray(basis[keep])
    mk = len(keep)

    T2[mk, :] = 0.0
    T2[mk, :n] = c
    for i in range(mk):
        cb = c[basis[i]]
        if cb != 0.0:
            T2[mk] -= cb * T2[i]
    status, it2 = kernel.pivot_loop(T2, basis, n, max_iter, PIVOT_TOL)
    iters = it1 + it2
    if status == _backend.ITERATION_LIMIT:
        raise LpError(f"phase 2 hit the iteration cap {max_iter}; basis={basis.tolist()}")
    if status == _backend.UNBOUNDED:
        return _failed("unbounded", n, iters, kernel.name)

    x = np.zeros(n)
    x[basis] = np.maximum(T2[:mk, -1], 0.0)
    y = np.zeros(m)
    if mk:
        B = As[keep][:, basis]
        y_kept = np.linalg.solve(B.T, c[basis])
        y[keep] = y_kept
    y = y * sign
    return LpSolution("optimal", float(c @ x), x, iters, y, float(y @ b), kernel.name)


def _failed(status, n, iters, backend):
    return LpSolution(status, float("nan"), np.full(n, np.nan), iters, backend=backend)


def _finish_trivial(c, n, backend):
    if (c < 0).any():
        return _failed("unbounded", n, 0, backend)
    return LpSolution("optimal", 0.0, np.zeros(n), 0, np.empty(0), 0.0, backend)

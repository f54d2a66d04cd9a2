import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pidecision.lp import LinearProgram, LpError, available_backends, solve, vertex_enumeration
from pidecision.lp import _backend

BACKENDS = available_backends()


def random_feasible(rng, m=None, n=None):
    m = m or int(rng.integers(1, 6))
    n = n or int(rng.integers(m + 1, 21))
    A = rng.integers(-3, 4, (m, n)).astype(float)
    x = rng.integers(0, 3, n) * (rng.random(n) < 0.5)
    c = rng.integers(0, 5, n).astype(float)
    return LinearProgram(c, A, A @ x)


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_equality(backend):
    sol = solve(LinearProgram([1.0], [[1.0]], [1.0]), backend=backend)
    assert sol.optimal and sol.value == 1.0


@pytest.mark.parametrize("backend", BACKENDS)
def test_simplex_minimum(backend):
    c = np.array([0.3, -0.7, 0.2, 0.9])
    sol = solve(LinearProgram(c, np.ones((1, 4)), [1.0]), backend=backend)
    assert sol.value == pytest.approx(c.min(), abs=1e-12)


def test_status_classification():
    assert solve(LinearProgram([1.0, 1.0], [[1.0, 1.0]], [-1.0])).status == "infeasible"
    assert solve(LinearProgram([-1.0, 0.0], [[1.0, -1.0]], [0.0])).status == "unbounded"
    assert solve(LinearProgram([1.0, 2.0], np.zeros((0, 2)), [])).value == 0.0


def test_bad_dimensions_rejected():
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], [[1.0]], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([np.inf], [[1.0]], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [1.0], "maximize")


def test_iteration_cap_raises():
    rng = np.random.default_rng(3)
    with pytest.raises(LpError, match="basis"):
        solve(random_feasible(rng, 5, 20), max_iter=1)


def test_fifty_random_instances_match_vertex_enumeration():
    rng = np.random.default_rng(50)
    for _ in range(50):
        lp = random_feasible(rng)
        sol = solve(lp)
        status, value, _ = vertex_enumeration(lp)
        assert status == sol.status == "optimal"
        assert sol.value == pytest.approx(value, abs=1e-7)


def test_redundant_rows_are_handled():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    lp = LinearProgram([1.0, 3.0, 1.0], A, A @ np.array([0.5, 0.5, 1.0]))
    sol = solve(lp)
    assert sol.optimal
    np.testing.assert_allclose(A @ sol.point, lp.eq_rhs, atol=1e-9)
    assert sol.value == pytest.approx(vertex_enumeration(lp)[1], abs=1e-9)


seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_feasibility_duality_and_sense(seed):
    rng = np.random.default_rng(seed)
    lp = random_feasible(rng)
    sol = solve(lp)
    assert sol.optimal
    assert np.abs(lp.eq_matrix @ sol.point - lp.eq_rhs).max() <= 1e-9 * (1 + np.abs(lp.eq_rhs).max())
    assert (sol.point >= 0).all()
    assert abs(sol.value - sol.dual_value) <= 1e-8 * (1 + abs(sol.value))
    # dual feasibility: reduced costs nonnegative
    assert (lp.objective - lp.eq_matrix.T @ sol.duals >= -1e-8).all()
    neg = solve(LinearProgram(-lp.objective, lp.eq_matrix, lp.eq_rhs, "max"))
    assert neg.value == -sol.value


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
@given(seeds)
def test_backends_bit_identical(seed):
    rng = np.random.default_rng(seed)
    lp = random_feasible(rng)
    a, b = solve(lp, backend="compiled"), solve(lp, backend="python")
    assert a.status == b.status and a.iterations == b.iterations
    np.testing.assert_array_equal(a.point, b.point)
    assert a.value == b.value


def test_pure_python_selected_by_environment():
    code = "from pidecision.lp import BACKEND; print(BACKEND)"
    env = dict(os.environ, PIDECISION_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get_kernel("fortran")

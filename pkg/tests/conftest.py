import sys

import numpy as np
import pytest


def central_diff(fun, x, h=1e-6):
    """Central-difference derivative of a scalar or vector map (rows = outputs)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = step
        cols.append((np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * step))
    return np.column_stack(cols)


def jacobi_eigenvalues(S, sweeps=50):
    """Cyclic Jacobi rotations for a symmetric matrix."""
    A = np.array(S, dtype=float)
    n = A.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2))
        if off < 1e-300:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(tau) / (abs(tau) + np.sqrt(1 + tau * tau)) if tau != 0 else 1.0
                c = 1 / np.sqrt(1 + t * t)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
    return np.sort(np.diag(A))


def random_full_rank(rng, m, n):
    while True:
        J = rng.standard_normal((m, n))
        if np.linalg.matrix_rank(J) == m:
            return J


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

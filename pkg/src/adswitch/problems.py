"""Test problems for equality-constrained minimization.

Every problem is a :class:`ProblemInstance` bundling the objective, its
gradient, the constraint map and its Jacobian.  Hock-Schittkowski and
Boggs-Tolle instances use the standard formulations and start points of
the CUTEst collection; two synthetic instances (``SPHERE-LIN`` and
``QUAD-PLANE``) have closed-form solutions and serve as oracles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "ProblemInstance",
    "DerivativeReport",
    "UnknownProblemError",
    "builtin",
    "available",
    "registry_dims",
    "load_manifest",
    "eval_objective",
    "eval_gradient",
    "eval_constraints",
    "eval_jacobian",
    "check_derivatives",
    "quad_plane_data",
    "quad_plane_solution",
]

SQRT2 = math.sqrt(2.0)


class UnknownProblemError(KeyError):
    """Raised when a problem name is not in the registry."""

    def __str__(self):
        return self.args[0] if self.args else "unknown problem"


@dataclass(frozen=True)
class ProblemInstance:
    """min f(x) subject to c(x) = 0, with x in R^n and c(x) in R^m."""

    name: str
    n: int
    m: int
    x0: np.ndarray
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    constraints: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    f_star: float | None = None
    x_star: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.m > self.n:
            raise ValueError(f"{self.name}: need 1 <= m <= n, got n={self.n}, m={self.m}")
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (self.n,):
            raise ValueError(f"{self.name}: x0 has shape {x0.shape}, expected ({self.n},)")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    def with_overrides(self, **changes) -> "ProblemInstance":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return ProblemInstance(**values)


def _check_x(problem: ProblemInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"{problem.name}: expected x of shape ({problem.n},), got {x.shape}")
    return x


def eval_objective(problem: ProblemInstance, x) -> float:
    return float(problem.objective(_check_x(problem, x)))


def eval_gradient(problem: ProblemInstance, x) -> np.ndarray:
    return np.asarray(problem.gradient(_check_x(problem, x)), dtype=float).reshape(problem.n)


def eval_constraints(problem: ProblemInstance, x) -> np.ndarray:
    return np.asarray(problem.constraints(_check_x(problem, x)), dtype=float).reshape(problem.m)


def eval_jacobian(problem: ProblemInstance, x) -> np.ndarray:
    return np.asarray(problem.jacobian(_check_x(problem, x)), dtype=float).reshape(problem.m, problem.n)


# ---------------------------------------------------------------------------
# Formulas.  Each builder returns (f, g, c, J) closures.


def _hs6():
    def f(x):
        return (1.0 - x[0]) ** 2

    def g(x):
        return np.array([-2.0 * (1.0 - x[0]), 0.0])

    def c(x):
        return np.array([10.0 * (x[1] - x[0] ** 2)])

    def J(x):
        return np.array([[-20.0 * x[0], 10.0]])

    return f, g, c, J


def _hs7():
    def f(x):
        return math.log(1.0 + x[0] ** 2) - x[1]

    def g(x):
        return np.array([2.0 * x[0] / (1.0 + x[0] ** 2), -1.0])

    def c(x):
        return np.array([(1.0 + x[0] ** 2) ** 2 + x[1] ** 2 - 4.0])

    def J(x):
        return np.array([[4.0 * x[0] * (1.0 + x[0] ** 2), 2.0 * x[1]]])

    return f, g, c, J


def _hs8():
    def f(x):
        return -1.0

    def g(x):
        return np.zeros(2)

    def c(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 25.0, x[0] * x[1] - 9.0])

    def J(x):
        return np.array([[2.0 * x[0], 2.0 * x[1]], [x[1], x[0]]])

    return f, g, c, J


def _hs9():
    a, b = math.pi / 12.0, math.pi / 16.0

    def f(x):
        return math.sin(a * x[0]) * math.cos(b * x[1])

    def g(x):
        return np.array(
            [
                a * math.cos(a * x[0]) * math.cos(b * x[1]),
                -b * math.sin(a * x[0]) * math.sin(b * x[1]),
            ]
        )

    def c(x):
        return np.array([4.0 * x[0] - 3.0 * x[1]])

    def J(x):
        return np.array([[4.0, -3.0]])

    return f, g, c, J


def _hs26():
    def f(x):
        return (x[0] - x[1]) ** 2 + (x[1] - x[2]) ** 4

    def g(x):
        d1, d2 = x[0] - x[1], x[1] - x[2]
        return np.array([2.0 * d1, -2.0 * d1 + 4.0 * d2**3, -4.0 * d2**3])

    def c(x):
        return np.array([(1.0 + x[1] ** 2) * x[0] + x[2] ** 4 - 3.0])

    def J(x):
        return np.array([[1.0 + x[1] ** 2, 2.0 * x[0] * x[1], 4.0 * x[2] ** 3]])

    return f, g, c, J


def _hs27():
    def f(x):
        return 0.01 * (x[0] - 1.0) ** 2 + (x[1] - x[0] ** 2) ** 2

    def g(x):
        r = x[1] - x[0] ** 2
        return np.array([0.02 * (x[0] - 1.0) - 4.0 * x[0] * r, 2.0 * r, 0.0])

    def c(x):
        return np.array([x[0] + x[2] ** 2 + 1.0])

    def J(x):
        return np.array([[1.0, 0.0, 2.0 * x[2]]])

    return f, g, c, J


def _hs28():
    def f(x):
        return (x[0] + x[1]) ** 2 + (x[1] + x[2]) ** 2

    def g(x):
        a, b = x[0] + x[1], x[1] + x[2]
        return np.array([2.0 * a, 2.0 * (a + b), 2.0 * b])

    def c(x):
        return np.array([x[0] + 2.0 * x[1] + 3.0 * x[2] - 1.0])

    def J(x):
        return np.array([[1.0, 2.0, 3.0]])

    return f, g, c, J


def _hs39():
    def f(x):
        return -x[0]

    def g(x):
        return np.array([-1.0, 0.0, 0.0, 0.0])

    def c(x):
        return np.array([x[1] - x[0] ** 3 - x[2] ** 2, x[0] ** 2 - x[1] - x[3] ** 2])

    def J(x):
        return np.array(
            [
                [-3.0 * x[0] ** 2, 1.0, -2.0 * x[2], 0.0],
                [2.0 * x[0], -1.0, 0.0, -2.0 * x[3]],
            ]
        )

    return f, g, c, J


def _hs40():
    def f(x):
        return -x[0] * x[1] * x[2] * x[3]

    def g(x):
        return -np.array(
            [x[1] * x[2] * x[3], x[0] * x[2] * x[3], x[0] * x[1] * x[3], x[0] * x[1] * x[2]]
        )

    def c(x):
        return np.array(
            [x[0] ** 3 + x[1] ** 2 - 1.0, x[0] ** 2 * x[3] - x[2], x[3] ** 2 - x[1]]
        )

    def J(x):
        return np.array(
            [
                [3.0 * x[0] ** 2, 2.0 * x[1], 0.0, 0.0],
                [2.0 * x[0] * x[3], 0.0, -1.0, x[0] ** 2],
                [0.0, -1.0, 0.0, 2.0 * x[3]],
            ]
        )

    return f, g, c, J


def _hs42():
    t = np.array([1.0, 2.0, 3.0, 4.0])

    def f(x):
        return float(np.sum((x - t) ** 2))

    def g(x):
        return 2.0 * (x - t)

    def c(x):
        return np.array([x[0] - 2.0, x[2] ** 2 + x[3] ** 2 - 2.0])

    def J(x):
        return np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 2.0 * x[2], 2.0 * x[3]]])

    return f, g, c, J


def _hs48():
    def f(x):
        return (x[0] - 1.0) ** 2 + (x[1] - x[2]) ** 2 + (x[3] - x[4]) ** 2

    def g(x):
        a, b = x[1] - x[2], x[3] - x[4]
        return np.array([2.0 * (x[0] - 1.0), 2.0 * a, -2.0 * a, 2.0 * b, -2.0 * b])

    A = np.array([[1.0, 1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 1.0, -2.0, -2.0]])
    rhs = np.array([5.0, -3.0])

    def c(x):
        return A @ x - rhs

    def J(x):
        return A.copy()

    return f, g, c, J


def _hs51():
    def f(x):
        return (x[0] - x[1]) ** 2 + (x[1] + x[2] - 2.0) ** 2 + (x[3] - 1.0) ** 2 + (x[4] - 1.0) ** 2

    def g(x):
        a, b = x[0] - x[1], x[1] + x[2] - 2.0
        return np.array([2.0 * a, -2.0 * a + 2.0 * b, 2.0 * b, 2.0 * (x[3] - 1.0), 2.0 * (x[4] - 1.0)])

    A = np.array(
        [[1.0, 3.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0, -2.0], [0.0, 1.0, 0.0, 0.0, -1.0]]
    )
    rhs = np.array([4.0, 0.0, 0.0])

    def c(x):
        return A @ x - rhs

    def J(x):
        return A.copy()

    return f, g, c, J


def _hs52():
    def f(x):
        return (4.0 * x[0] - x[1]) ** 2 + (x[1] + x[2] - 2.0) ** 2 + (x[3] - 1.0) ** 2 + (x[4] - 1.0) ** 2

    def g(x):
        a, b = 4.0 * x[0] - x[1], x[1] + x[2] - 2.0
        return np.array([8.0 * a, -2.0 * a + 2.0 * b, 2.0 * b, 2.0 * (x[3] - 1.0), 2.0 * (x[4] - 1.0)])

    A = np.array(
        [[1.0, 3.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0, -2.0], [0.0, 1.0, 0.0, 0.0, -1.0]]
    )

    def c(x):
        return A @ x

    def J(x):
        return A.copy()

    return f, g, c, J


def _hs61():
    def f(x):
        return 4.0 * x[0] ** 2 + 2.0 * x[1] ** 2 + 2.0 * x[2] ** 2 - 33.0 * x[0] + 16.0 * x[1] - 24.0 * x[2]

    def g(x):
        return np.array([8.0 * x[0] - 33.0, 4.0 * x[1] + 16.0, 4.0 * x[2] - 24.0])

    def c(x):
        return np.array([3.0 * x[0] - 2.0 * x[1] ** 2 - 7.0, 4.0 * x[0] - x[2] ** 2 - 11.0])

    def J(x):
        return np.array([[3.0, -4.0 * x[1], 0.0], [4.0, 0.0, -2.0 * x[2]]])

    return f, g, c, J


def _hs77():
    def f(x):
        return (
            (x[0] - 1.0) ** 2
            + (x[0] - x[1]) ** 2
            + (x[2] - 1.0) ** 2
            + (x[3] - 1.0) ** 4
            + (x[4] - 1.0) ** 6
        )

    def g(x):
        a = x[0] - x[1]
        return np.array(
            [
                2.0 * (x[0] - 1.0) + 2.0 * a,
                -2.0 * a,
                2.0 * (x[2] - 1.0),
                4.0 * (x[3] - 1.0) ** 3,
                6.0 * (x[4] - 1.0) ** 5,
            ]
        )

    def c(x):
        return np.array(
            [
                x[0] ** 2 * x[3] + math.sin(x[3] - x[4]) - 2.0 * SQRT2,
                x[1] + x[2] ** 4 * x[3] ** 2 - 8.0 - SQRT2,
            ]
        )

    def J(x):
        cs = math.cos(x[3] - x[4])
        return np.array(
            [
                [2.0 * x[0] * x[3], 0.0, 0.0, x[0] ** 2 + cs, -cs],
                [0.0, 1.0, 4.0 * x[2] ** 3 * x[3] ** 2, 2.0 * x[2] ** 4 * x[3], 0.0],
            ]
        )

    return f, g, c, J


def _hs78():
    def f(x):
        return float(np.prod(x))

    def g(x):
        return np.array([float(np.prod(np.delete(x, i))) for i in range(5)])

    def c(x):
        return np.array(
            [
                float(x @ x) - 10.0,
                x[1] * x[2] - 5.0 * x[3] * x[4],
                x[0] ** 3 + x[1] ** 3 + 1.0,
            ]
        )

    def J(x):
        return np.array(
            [
                2.0 * x,
                [0.0, x[2], x[1], -5.0 * x[4], -5.0 * x[3]],
                [3.0 * x[0] ** 2, 3.0 * x[1] ** 2, 0.0, 0.0, 0.0],
            ]
        )

    return f, g, c, J


def _chain5(rhs1: float, rhs2: float):
    # shared by HS79 and BT11
    def f(x):
        return (
            (x[0] - 1.0) ** 2
            + (x[0] - x[1]) ** 2
            + (x[1] - x[2]) ** 2
            + (x[2] - x[3]) ** 4
            + (x[3] - x[4]) ** 4
        )

    def g(x):
        a, b, d, e = x[0] - x[1], x[1] - x[2], x[2] - x[3], x[3] - x[4]
        return np.array(
            [
                2.0 * (x[0] - 1.0) + 2.0 * a,
                -2.0 * a + 2.0 * b,
                -2.0 * b + 4.0 * d**3,
                -4.0 * d**3 + 4.0 * e**3,
                -4.0 * e**3,
            ]
        )

    def c(x):
        return np.array(
            [
                x[0] + x[1] ** 2 + x[2] ** 3 - rhs1,
                x[1] - x[2] ** 2 + x[3] - rhs2,
                x[0] * x[4] - 2.0,
            ]
        )

    def J(x):
        return np.array(
            [
                [1.0, 2.0 * x[1], 3.0 * x[2] ** 2, 0.0, 0.0],
                [0.0, 1.0, -2.0 * x[2], 1.0, 0.0],
                [x[4], 0.0, 0.0, 0.0, x[0]],
            ]
        )

    return f, g, c, J


def _hs79():
    return _chain5(2.0 + 3.0 * SQRT2, -2.0 + 2.0 * SQRT2)


def _bt11():
    return _chain5(-2.0 + 3.0 * SQRT2, -2.0 + 2.0 * SQRT2)


def _bt1():
    def f(x):
        return 100.0 * x[0] ** 2 + 100.0 * x[1] ** 2 - x[0] - 100.0

    def g(x):
        return np.array([200.0 * x[0] - 1.0, 200.0 * x[1]])

    def c(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 1.0])

    def J(x):
        return np.array([[2.0 * x[0], 2.0 * x[1]]])

    return f, g, c, J


def _bt2():
    rhs = 4.0 + 3.0 * SQRT2

    def f(x):
        return (x[0] - 1.0) ** 2 + (x[0] - x[1]) ** 2 + (x[1] - x[2]) ** 4

    def g(x):
        a, b = x[0] - x[1], x[1] - x[2]
        return np.array([2.0 * (x[0] - 1.0) + 2.0 * a, -2.0 * a + 4.0 * b**3, -4.0 * b**3])

    def c(x):
        return np.array([x[0] * (1.0 + x[1] ** 2) + x[2] ** 4 - rhs])

    def J(x):
        return np.array([[1.0 + x[1] ** 2, 2.0 * x[0] * x[1], 4.0 * x[2] ** 3]])

    return f, g, c, J


def _bt10():
    def f(x):
        return -x[0]

    def g(x):
        return np.array([-1.0, 0.0])

    def c(x):
        return np.array([x[1] - x[0] ** 3, -(x[0] ** 2) + x[1]])

    def J(x):
        return np.array([[-3.0 * x[0] ** 2, 1.0], [-2.0 * x[0], 1.0]])

    return f, g, c, J


def _maratos():
    tau = 1.0e-6

    def f(x):
        return -x[0] + tau * (x[0] ** 2 + x[1] ** 2 - 1.0)

    def g(x):
        return np.array([-1.0 + 2.0 * tau * x[0], 2.0 * tau * x[1]])

    def c(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 1.0])

    def J(x):
        return np.array([[2.0 * x[0], 2.0 * x[1]]])

    return f, g, c, J


def _byrdsphr():
    def f(x):
        return -float(np.sum(x))

    def g(x):
        return -np.ones(3)

    def c(x):
        return np.array(
            [float(x @ x) - 9.0, (x[0] - 1.0) ** 2 + x[1] ** 2 + x[2] ** 2 - 9.0]
        )

    def J(x):
        return np.array([2.0 * x, [2.0 * (x[0] - 1.0), 2.0 * x[1], 2.0 * x[2]]])

    return f, g, c, J


def _sphere_lin():
    def f(x):
        return float(np.sum(x))

    def g(x):
        return np.ones_like(x)

    def c(x):
        return np.array([float(x @ x) - 1.0])

    def J(x):
        return 2.0 * x.reshape(1, -1)

    return f, g, c, J


def _quad_plane(A: np.ndarray, b: np.ndarray, p: np.ndarray):
    def f(x):
        r = x - p
        return 0.5 * float(r @ r)

    def g(x):
        return x - p

    def c(x):
        return A @ x - b

    def J(x):
        return A.copy()

    return f, g, c, J


def quad_plane_data(n: int = 5, m: int = 3):
    """Default QUAD-PLANE data: rows of A are [1, 1, 0, ...] shifted right by one per row."""
    if not 1 <= m <= n - 1:
        raise ValueError("QUAD-PLANE needs 1 <= m <= n - 1")
    A = np.zeros((m, n))
    for i in range(m):
        A[i, i] = A[i, i + 1] = 1.0
    return A, np.ones(m), np.full(n, 2.0)


def quad_plane_solution(A, b, p) -> np.ndarray:
    """Euclidean projection of p onto {x : Ax = b}."""
    return p - A.T @ np.linalg.solve(A @ A.T, A @ p - b)


# name -> (builder, n, m, x0, f_star).  (n, m) and f_star follow the
# standard reference values; x0 follows CUTEst.
_REGISTRY: dict[str, tuple] = {
    "BT1": (_bt1, 2, 1, [0.08, 0.06], -9.999918e-01),
    "BT2": (_bt2, 3, 1, [10.0, 10.0, 10.0], 3.256821e-02),
    "BT10": (_bt10, 2, 2, [2.0, 2.0], -1.0),
    # reference optimum not reproduced by this formulation, so no f_star
    "BT11": (_bt11, 5, 3, [2.0] * 5, None),
    "BYRDSPHR": (_byrdsphr, 3, 2, [5.0, 1.0e-4, -1.0e-4], -4.683300e00),
    "HS6": (_hs6, 2, 1, [-1.2, 1.0], 0.0),
    "HS7": (_hs7, 2, 1, [2.0, 2.0], -1.732051e00),
    "HS8": (_hs8, 2, 2, [2.0, 1.0], -1.0),
    "HS9": (_hs9, 2, 1, [0.0, 0.0], -5.0e-01),
    "HS26": (_hs26, 3, 1, [-2.6, 2.0, 2.0], 0.0),
    "HS27": (_hs27, 3, 1, [2.0, 2.0, 2.0], 4.0e-02),
    "HS28": (_hs28, 3, 1, [-4.0, 1.0, 1.0], 0.0),
    "HS39": (_hs39, 4, 2, [2.0] * 4, -1.0),
    "HS40": (_hs40, 4, 3, [0.8] * 4, -2.5e-01),
    "HS42": (_hs42, 4, 2, [1.0] * 4, 1.385786e01),
    "HS48": (_hs48, 5, 2, [3.0, 5.0, -3.0, 2.0, -2.0], 0.0),
    "HS51": (_hs51, 5, 3, [2.5, 0.5, 2.0, -1.0, 0.5], 0.0),
    "HS52": (_hs52, 5, 3, [2.0] * 5, 5.326648e00),
    "HS61": (_hs61, 3, 2, [0.0, 0.0, 0.0], None),
    "HS77": (_hs77, 5, 2, [2.0] * 5, 2.415051e-01),
    "HS78": (_hs78, 5, 3, [-2.0, 1.5, 2.0, -1.0, -1.0], -2.919700e00),
    "HS79": (_hs79, 5, 3, [2.0] * 5, 7.877683e-02),
    "MARATOS": (_maratos, 2, 1, [1.1, 0.1], -1.0),
}

SYNTHETIC = ("SPHERE-LIN", "QUAD-PLANE")


def available() -> list[str]:
    return sorted(_REGISTRY) + list(SYNTHETIC)


def registry_dims() -> dict[str, tuple[int, int]]:
    """(n, m) for every registered name, at default sizes."""
    dims = {name: (entry[1], entry[2]) for name, entry in _REGISTRY.items()}
    dims["SPHERE-LIN"] = (2, 1)
    dims["QUAD-PLANE"] = (5, 3)
    return dims


def _sphere_lin_instance(n: int) -> ProblemInstance:
    f, g, c, J = _sphere_lin()
    x0 = np.zeros(n)
    x0[0] = 1.0
    return ProblemInstance(
        "SPHERE-LIN", n, 1, x0, f, g, c, J,
        f_star=-math.sqrt(n),
        x_star=np.full(n, -1.0 / math.sqrt(n)),
    )


def _quad_plane_instance(n: int, m: int) -> ProblemInstance:
    A, b, p = quad_plane_data(n, m)
    x_star = quad_plane_solution(A, b, p)
    f, g, c, J = _quad_plane(A, b, p)
    return ProblemInstance(
        "QUAD-PLANE", n, m, np.zeros(n), f, g, c, J,
        f_star=f(x_star),
        x_star=x_star,
    )


def builtin(name: str, n: int | None = None, m: int | None = None) -> ProblemInstance:
    """Look up a registered problem.

    ``n`` (and ``m`` for QUAD-PLANE) resize the synthetic instances and are
    rejected for fixed-size ones unless they match the registered size.
    """
    if name == "SPHERE-LIN":
        if m not in (None, 1):
            raise ValueError("SPHERE-LIN has exactly one constraint")
        return _sphere_lin_instance(2 if n is None else n)
    if name == "QUAD-PLANE":
        return _quad_plane_instance(5 if n is None else n, 3 if m is None else m)
    try:
        build, n_reg, m_reg, x0, f_star = _REGISTRY[name]
    except KeyError:
        raise UnknownProblemError(
            f"unknown problem {name!r}; available: {', '.join(available())}"
        ) from None
    if (n is not None and n != n_reg) or (m is not None and m != m_reg):
        raise ValueError(f"{name} has fixed size n={n_reg}, m={m_reg}")
    f, g, c, J = build()
    problem = ProblemInstance(name, n_reg, m_reg, x0, f, g, c, J, f_star=f_star)
    # registration cross-check: the formula must produce the tabulated sizes
    if c(problem.x0).shape != (m_reg,) or J(problem.x0).shape != (m_reg, n_reg):
        raise RuntimeError(f"{name}: formula does not match registered (n, m)")
    return problem


def load_manifest(path) -> ProblemInstance:
    """Load a problem from a JSON manifest.

    The manifest selects a registered formula and may override ``x0`` and
    ``f_star`` (and ``n``/``m`` for the synthetic instances)::

        {"formula": "HS6", "name": "HS6-alt", "x0": [-1.0, 1.0], "f_star": 0.0}
    """
    path = Path(path)
    with path.open() as fh:
        spec = json.load(fh)
    try:
        formula = spec["formula"]
    except KeyError:
        raise ValueError(f"{path}: manifest needs a 'formula' key") from None
    problem = builtin(formula, spec.get("n"), spec.get("m"))
    changes = {}
    if "name" in spec:
        changes["name"] = spec["name"]
    if "x0" in spec:
        changes["x0"] = np.asarray(spec["x0"], dtype=float)
    if "f_star" in spec:
        changes["f_star"] = None if spec["f_star"] is None else float(spec["f_star"])
    return problem.with_overrides(**changes) if changes else problem


# ---------------------------------------------------------------------------
# Derivative checking


@dataclass
class DerivativeReport:
    gradient_error: float
    jacobian_row_errors: np.ndarray

    @property
    def jacobian_error(self) -> float:
        return float(np.max(self.jacobian_row_errors)) if self.jacobian_row_errors.size else 0.0

    @property
    def max_error(self) -> float:
        return max(self.gradient_error, self.jacobian_error)


def _rel_err(analytic: np.ndarray, approx: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(approx), initial=0.0)))
    return float(np.max(np.abs(analytic - approx), initial=0.0)) / scale


def check_derivatives(problem: ProblemInstance, x=None, h: float = 1e-6) -> DerivativeReport:
    """Compare analytic derivatives with central differences.

    The step for component i is ``h * max(1, |x_i|)``.  Errors are
    max-abs differences relative to ``max(1, max|finite difference|)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = _check_x(problem, problem.x0 if x is None else x)
    fd_grad = np.empty(problem.n)
    fd_jac = np.empty((problem.m, problem.n))
    for i in range(problem.n):
        step = h * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        fd_grad[i] = (eval_objective(problem, xp) - eval_objective(problem, xm)) / (2 * step)
        fd_jac[:, i] = (eval_constraints(problem, xp) - eval_constraints(problem, xm)) / (2 * step)
    grad = eval_gradient(problem, x)
    jac = eval_jacobian(problem, x)
    rows = np.array([_rel_err(jac[i], fd_jac[i]) for i in range(problem.m)])
    return DerivativeReport(_rel_err(grad, fd_grad), rows)

"""Tangent-space linear algebra built on a pivoted QR factorization of J^T.

With ``J^T P = Q R`` (P a column permutation, R upper triangular with
nonincreasing diagonal magnitude) the first ``rank`` columns of Q span
range(J^T) and the trailing ``n - rank`` columns span null(J).  All
quantities the solver needs (projected gradient, least-squares
multipliers, damped Gauss-Newton normal direction, smallest singular
value) are read off these factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "QrFactors",
    "RankDeficiencyError",
    "factorize",
    "project_tangent",
    "multipliers",
    "normal_direction",
    "sigma_min",
]

DEFAULT_RANK_TOL = 1e-10


class RankDeficiencyError(np.linalg.LinAlgError):
    """The operation needs a full-row-rank Jacobian."""


@dataclass(frozen=True)
class QrFactors:
    q: np.ndarray  # (n, n)
    r: np.ndarray  # (n, m)
    perm: np.ndarray  # (m,), J^T[:, perm] = q @ r
    rank: int
    j_norm: float

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m(self) -> int:
        return self.r.shape[1]

    @property
    def full_rank(self) -> bool:
        return self.rank == self.m


def factorize(J, rank_tol: float = DEFAULT_RANK_TOL) -> QrFactors:
    """Householder QR with column pivoting of J^T.

    ``rank`` counts the diagonal entries of R with ``|R_ii| > rank_tol * |R_11|``.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2:
        raise ValueError(f"J must be a 2-d array, got shape {J.shape}")
    m, n = J.shape
    if m > n:
        raise ValueError(f"need m <= n, got J of shape {J.shape}")
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    if not np.all(np.isfinite(J)):
        raise FloatingPointError("Jacobian has non-finite entries")

    q, r, perm = sla.qr(J.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(diag > rank_tol * diag[0]))
    j_norm = float(np.max(np.linalg.norm(J, axis=1))) if m else 0.0
    for a in (q, r, perm):
        a.setflags(write=False)
    return QrFactors(q, r, perm, rank, j_norm)


def project_tangent(factors: QrFactors, g) -> np.ndarray:
    """Orthogonal projection of g onto null(J)."""
    g = np.asarray(g, dtype=float)
    if g.shape != (factors.n,):
        raise ValueError(f"expected vector of length {factors.n}, got shape {g.shape}")
    z = factors.q[:, factors.rank :]
    return z @ (z.T @ g)


def multipliers(factors: QrFactors, g) -> np.ndarray:
    """Least-squares multipliers: the solution of (J J^T) lam = -J g.

    With J = P R1^T Q1^T this reduces to lam = -P R1^{-1} Q1^T g.
    """
    if not factors.full_rank:
        raise RankDeficiencyError(
            f"multipliers need full rank; numerical rank {factors.rank} < m = {factors.m}"
        )
    g = np.asarray(g, dtype=float)
    if g.shape != (factors.n,):
        raise ValueError(f"expected vector of length {factors.n}, got shape {g.shape}")
    m = factors.m
    r1 = factors.r[:m, :m]
    y = sla.solve_triangular(r1, factors.q[:, :m].T @ g, lower=False)
    lam = np.empty(m)
    lam[factors.perm] = -y
    return lam


def normal_direction(factors: QrFactors, c, delta: float) -> np.ndarray:
    """Regularized Gauss-Newton direction ``-J^T (J J^T + delta I)^{-1} c``.

    Full rank, ``delta == 0``: ``-Q1 R1^{-T} P^T c``.
    Full rank, ``delta > 0``: ``-Q1 R1 (R1^T R1 + delta I)^{-1} P^T c``.
    Rank deficient (``delta > 0`` only): J is replaced by its rank-r
    truncation ``P S^T Q1^T`` with ``S = R[:r, :]``, giving
    ``-Q1 (S S^T + delta I)^{-1} S P^T c``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    c = np.asarray(c, dtype=float)
    if c.shape != (factors.m,):
        raise ValueError(f"expected vector of length {factors.m}, got shape {c.shape}")
    if delta == 0 and not factors.full_rank:
        raise RankDeficiencyError(
            f"undamped normal step needs full rank; numerical rank {factors.rank} < m = {factors.m}"
        )
    r = factors.rank
    if r == 0:
        return np.zeros(factors.n)
    cp = c[factors.perm]
    q1 = factors.q[:, :r]
    if factors.full_rank:
        r1 = factors.r[:r, :r]
        if delta == 0:
            w = sla.solve_triangular(r1, cp, trans="T", lower=False)
        else:
            w = r1 @ sla.solve(r1.T @ r1 + delta * np.eye(r), cp, assume_a="pos")
    else:
        s = factors.r[:r, :]
        w = sla.solve(s @ s.T + delta * np.eye(r), s @ cp, assume_a="pos")
    return -(q1 @ w)


def sigma_min(factors: QrFactors) -> float:
    """Smallest singular value of the leading rank x rank block of R."""
    r = factors.rank
    if r == 0:
        return 0.0
    return float(np.linalg.svd(factors.r[:r, :r], compute_uv=False)[-1])

"""Adaptive switching solver for min f(x) s.t. c(x) = 0.

Each iteration evaluates c, J and the gradient, projects the gradient onto
the tangent space and then takes either

* a tangential AdaGrad-norm step ``x - alpha * g_T`` when
  ``||c|| <= beta * alpha * ||g_T||``, or
* a normal step along the damped Gauss-Newton direction for ``1/2||c||^2``,
  with an Armijo backtracking line search.

The objective value is never used to accept or reject a step.  It is only
evaluated by the optional "acceptable value" stopping rule (``accept_rule``
with a problem that carries ``f_star``) and in diagnostics mode.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kkt
from .diagnostics import IterationRecord, RunReport, TerminationStatus, audit_run, lyapunov
from .problems import ProblemInstance, eval_constraints, eval_gradient, eval_jacobian, eval_objective

__all__ = [
    "SolverConfig",
    "SolverState",
    "Measures",
    "NormalStepStalled",
    "adagrad_update",
    "should_take_tangential",
    "tangential_step",
    "normal_step",
    "check_termination",
    "solve",
]

log = logging.getLogger(__name__)

ACCEPT_TOL = 1e-7


@dataclass(frozen=True)
class SolverConfig:
    beta: float = 0.01
    eta: float = 1.0
    theta: float = 1000.0
    delta: float = 1e-5
    varsigma: float = 1e-5
    omega: float = 1.0  # reserved, not used by the iteration
    epsilon: float = 1e-5
    max_iter: int = 100_000
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 60
    rank_tol: float = kkt.DEFAULT_RANK_TOL
    rho_diag: float | None = None
    diagnostics: bool = False
    # stop once f is within 1e-7 (relative) of a known f_star; off by default
    accept_rule: bool = False

    def __post_init__(self):
        for name in ("beta", "eta", "varsigma"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not self.theta > 1:
            raise ValueError(f"theta must exceed 1, got {self.theta}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.max_iter < 0 or self.max_backtracks < 0:
            raise ValueError("iteration limits must be nonnegative")
        if not 0 < self.armijo_c1 < 1:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.rank_tol <= 0:
            raise ValueError("rank_tol must be positive")
        if self.rho_diag is not None and self.rho_diag <= 0:
            raise ValueError("rho_diag must be positive")

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SolverState:
    x: np.ndarray
    k: int = 0
    gamma: float = 0.0
    n_tangential: int = 0
    n_normal: int = 0
    last_alpha_t: float | None = None
    backtracks: int | None = None


@dataclass(frozen=True)
class Measures:
    gT_norm: float
    c_norm: float
    JTc_norm: float


class NormalStepStalled(RuntimeError):
    def __init__(self, message, backtracks=0):
        super().__init__(message)
        self.backtracks = backtracks


def adagrad_update(gamma: float, g_T, eta: float, varsigma: float) -> tuple[float, float]:
    """Return (gamma + ||g_T||^2, eta / sqrt(gamma + ||g_T||^2 + varsigma))."""
    g_T = np.asarray(g_T, dtype=float)
    gamma_plus = gamma + float(g_T @ g_T)
    return gamma_plus, eta / math.sqrt(gamma_plus + varsigma)


def should_take_tangential(c_norm: float, alpha_T: float, gT_norm: float, beta: float) -> bool:
    return c_norm <= beta * alpha_T * gT_norm


def tangential_step(state: SolverState, g_T, gamma_plus: float, alpha_T: float) -> SolverState:
    g_T = np.asarray(g_T, dtype=float)
    x_new = state.x - alpha_T * g_T
    if not np.all(np.isfinite(x_new)):
        raise FloatingPointError("non-finite tangential step")
    return dataclasses.replace(
        state,
        x=x_new,
        k=state.k + 1,
        gamma=gamma_plus,
        n_tangential=state.n_tangential + 1,
        last_alpha_t=alpha_T,
        backtracks=None,
    )


def normal_step(
    state: SolverState,
    c,
    factors: kkt.QrFactors,
    constraints_eval: Callable[[np.ndarray], np.ndarray],
    config: SolverConfig,
) -> SolverState:
    """Backtracking line search on 1/2||c||^2 along the damped Gauss-Newton direction.

    The first trial length is capped so that every trial satisfies
    ``||s|| <= theta * ||c||``.  Raises NormalStepStalled when no trial
    gives sufficient (and strict) decrease.
    """
    c = np.asarray(c, dtype=float)
    c_norm = float(np.linalg.norm(c))
    try:
        d = kkt.normal_direction(factors, c, config.delta)
    except kkt.RankDeficiencyError as exc:
        raise NormalStepStalled(str(exc)) from exc
    # J^T c = Q R P^T c
    jtc = factors.q @ (factors.r @ c[factors.perm])
    slope = float(d @ jtc)
    d_norm = float(np.linalg.norm(d))
    if not slope < 0 or d_norm == 0.0:
        raise NormalStepStalled(f"normal direction is not a descent direction (slope {slope:.3e})")

    half_sq = 0.5 * c_norm**2
    step = min(1.0, config.theta * c_norm / d_norm)
    for bt in range(config.max_backtracks + 1):
        x_trial = state.x + step * d
        c_trial = constraints_eval(x_trial)
        if np.all(np.isfinite(c_trial)):
            ct_norm = float(np.linalg.norm(c_trial))
            if 0.5 * ct_norm**2 <= half_sq + config.armijo_c1 * step * slope and ct_norm < c_norm:
                return dataclasses.replace(
                    state,
                    x=x_trial,
                    k=state.k + 1,
                    n_normal=state.n_normal + 1,
                    backtracks=bt,
                )
        step *= config.backtrack_factor
    raise NormalStepStalled(
        f"no sufficient decrease after {config.max_backtracks} backtracks", config.max_backtracks
    )


def _acceptable(f: float, f_star: float) -> bool:
    if abs(f_star) < ACCEPT_TOL:
        return abs(f) <= abs(f_star) + ACCEPT_TOL
    return abs(f - f_star) <= ACCEPT_TOL * abs(f_star)


def check_termination(
    measures: Measures,
    k: int,
    config: SolverConfig,
    f_star: float | None = None,
    objective: Callable[[], float] | None = None,
) -> TerminationStatus | None:
    """Stopping rules, in order: convergence, infeasible critical point,
    acceptable objective value, iteration cap.  Returns None to continue.

    ``objective`` is a zero-argument callable giving f at the current
    iterate; it is only called by the acceptable-value rule.
    """
    eps = config.epsilon
    gt, cn, jtc = measures.gT_norm, measures.c_norm, measures.JTc_norm

    def status(kind, f=None):
        return TerminationStatus(kind, k, gt, cn, jtc, f)

    if max(gt, cn) <= eps:
        return status("Converged")
    if jtc <= eps and cn > eps:
        return status("InfeasibleStationary")
    if cn <= eps and f_star is not None and objective is not None:
        f = objective()
        if _acceptable(f, f_star):
            return status("AcceptedOptimal", f)
    if k >= config.max_iter:
        return status("MaxIterations")
    return None


def solve(
    problem: ProblemInstance,
    config: SolverConfig | None = None,
    x0=None,
    perturb: Callable[[np.ndarray], np.ndarray] | None = None,
    audit: bool = True,
    keep_iterates: bool = False,
) -> RunReport:
    """Run the switching method from ``x0`` (default ``problem.x0``).

    ``perturb`` maps the exact gradient to the one the method sees (used
    for noise studies).  With ``keep_iterates`` the report also carries
    every iterate and Jacobian in ``report.iterates``.
    """
    config = config or SolverConfig()
    t_start = time.perf_counter()
    x = np.array(problem.x0 if x0 is None else x0, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({problem.n},)")

    n_f = 0

    def objective_at(xk):
        nonlocal n_f
        n_f += 1
        return eval_objective(problem, xk)

    def constraints_eval(xk):
        return eval_constraints(problem, xk)

    state = SolverState(x=x)
    history: list[IterationRecord] = []
    iterates: list[tuple[np.ndarray, np.ndarray]] = []
    status = None

    while status is None:
        xk = state.x
        try:
            c = eval_constraints(problem, xk)
            J = eval_jacobian(problem, xk)
            g = eval_gradient(problem, xk)
            if perturb is not None:
                g = perturb(g)
            if not (np.all(np.isfinite(c)) and np.all(np.isfinite(J)) and np.all(np.isfinite(g))):
                raise FloatingPointError(f"non-finite evaluation at iterate {state.k}")
            factors = kkt.factorize(J, config.rank_tol)
        except FloatingPointError as exc:
            nan = math.nan
            history.append(IterationRecord(state.k, None, float(np.linalg.norm(xk)), nan, nan, nan, nan, state.gamma))
            status = TerminationStatus("NumericalFailure", state.k, nan, nan, nan, message=str(exc))
            break

        if keep_iterates:
            iterates.append((xk.copy(), J))
        g_T = kkt.project_tangent(factors, g)
        jtc = J.T @ c
        measures = Measures(float(np.linalg.norm(g_T)), float(np.linalg.norm(c)), float(np.linalg.norm(jtc)))
        gamma_plus, alpha = adagrad_update(state.gamma, g_T, config.eta, config.varsigma)
        rec = IterationRecord(
            k=state.k,
            step_type=None,
            x_norm=float(np.linalg.norm(xk)),
            gT_norm=measures.gT_norm,
            c_norm=measures.c_norm,
            JTc_norm=measures.JTc_norm,
            alpha_T=alpha,
            gamma=gamma_plus,
        )
        if config.diagnostics:
            rec.f = objective_at(xk)
            if config.rho_diag is not None and factors.full_rank:
                lam = kkt.multipliers(factors, g)
                rec.psi = lyapunov(rec.f, c, lam, config.rho_diag)
        history.append(rec)

        status = check_termination(
            measures,
            state.k,
            config,
            problem.f_star if config.accept_rule else None,
            lambda: objective_at(xk),
        )
        if status is not None:
            break

        try:
            if should_take_tangential(measures.c_norm, alpha, measures.gT_norm, config.beta):
                state = tangential_step(state, g_T, gamma_plus, alpha)
                rec.step_type = "tangential"
                rec.step_norm = alpha * measures.gT_norm
            else:
                new = normal_step(state, c, factors, constraints_eval, config)
                rec.step_type = "normal"
                rec.backtracks = new.backtracks
                rec.step_norm = float(np.linalg.norm(new.x - xk))
                state = new
        except NormalStepStalled as exc:
            rec.backtracks = exc.backtracks
            status = TerminationStatus("NormalStepStalled", state.k, *_m(measures), message=str(exc))
        except FloatingPointError as exc:
            status = TerminationStatus("NumericalFailure", state.k, *_m(measures), message=str(exc))

    if config.diagnostics and status.f is None and history and history[-1].f is not None:
        status.f = history[-1].f
    report = RunReport(
        problem=problem.name,
        n=problem.n,
        m=problem.m,
        config=config.to_dict(),
        status=status,
        history=history,
        x_final=state.x.copy(),
        objective_evals=n_f,
        iterates=iterates if keep_iterates else None,
    )
    if audit:
        report.audit = audit_run(history, config)
    report.wall_time = time.perf_counter() - t_start
    log.debug("%s: %s after %d iterations", problem.name, status.kind, status.k_final)
    return report


def _m(measures: Measures):
    return measures.gT_norm, measures.c_norm, measures.JTc_norm

"""Iteration history, run reports, post-run audits and their serialization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "IterationRecord",
    "TerminationStatus",
    "RunReport",
    "AuditResult",
    "lyapunov",
    "audit_run",
    "write_history_csv",
    "read_history_csv",
    "write_report_json",
    "read_report_json",
    "CSV_COLUMNS",
    "EXITC",
]

CSV_COLUMNS = ("k", "step_type", "f", "gT_norm", "c_norm", "JTc_norm", "alpha_T", "gamma", "backtracks", "psi")

# short exit codes used in summary lines
EXITC = {
    "Converged": "convg",
    "InfeasibleStationary": "infeas",
    "AcceptedOptimal": "accept",
    "MaxIterations": "maxit",
    "NormalStepStalled": "stall",
    "NumericalFailure": "nanfail",
}
SUCCESS_KINDS = frozenset({"Converged", "InfeasibleStationary", "AcceptedOptimal"})

# relative slack for strict inequalities in audits
AUDIT_SLACK = 1e-14


@dataclass
class IterationRecord:
    """Quantities at iterate k and the step taken from it.

    ``gamma`` is the accumulated sum after adding ``gT_norm**2`` (the value
    ``alpha_T`` is computed from).  ``step_type`` is None on the final
    record, where no step was completed.
    """

    k: int
    step_type: str | None
    x_norm: float
    gT_norm: float
    c_norm: float
    JTc_norm: float
    alpha_T: float
    gamma: float
    f: float | None = None
    backtracks: int | None = None
    psi: float | None = None
    step_norm: float | None = None


@dataclass
class TerminationStatus:
    kind: str
    k_final: int
    gT_norm: float
    c_norm: float
    JTc_norm: float
    f: float | None = None
    message: str = ""

    @property
    def exitc(self) -> str:
        return EXITC[self.kind]

    @property
    def success(self) -> bool:
        return self.kind in SUCCESS_KINDS


@dataclass
class AuditResult:
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class RunReport:
    problem: str
    n: int
    m: int
    config: dict
    status: TerminationStatus
    history: list[IterationRecord]
    x_final: np.ndarray
    audit: dict[str, AuditResult] = field(default_factory=dict)
    wall_time: float = 0.0
    objective_evals: int = 0
    iterates: list | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return self.status.k_final

    def audits_passed(self) -> bool:
        return all(a.passed for a in self.audit.values())


def lyapunov(f: float, c, lambda_hat, rho: float) -> float:
    """f + lambda_hat^T c + rho ||c||."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    c = np.asarray(c, dtype=float)
    lam = np.asarray(lambda_hat, dtype=float)
    return float(f + lam @ c + rho * np.linalg.norm(c))


def _tangential(history):
    return [r for r in history if r.step_type == "tangential"]


def audit_run(history: list[IterationRecord], config) -> dict[str, AuditResult]:
    """Check the run-time invariants of a completed history.

    ``config`` is a SolverConfig (or anything with ``beta``, ``eta``,
    ``theta`` and ``varsigma``).  Margins are signed so that a positive
    margin means the inequality holds; failures are reported, never raised.
    """
    eta, beta, theta, vs = config.eta, config.beta, config.theta, config.varsigma
    out = {}

    # (a) strict decrease of ||c|| across normal steps
    worst, bad = math.inf, []
    for rec, nxt in zip(history, history[1:]):
        if rec.step_type != "normal":
            continue
        margin = rec.c_norm - nxt.c_norm
        worst = min(worst, margin)
        if not margin > 0:
            bad.append(rec.k)
    out["normal_decrease"] = AuditResult(not bad, worst, f"violations at k={bad}" if bad else "")

    # (b) telescoping bounds over the tangential subsequence
    tang = _tangential(history)
    g2 = np.array([r.gT_norm**2 for r in tang])
    alpha = np.array([r.alpha_T for r in tang])
    gamma_final = float(g2.sum())
    if tang and gamma_final > 0:
        lhs1 = float(np.sum(alpha * g2))
        if g2[0] >= vs:
            rhs1 = eta / (2.0 * math.sqrt(2.0)) * math.sqrt(gamma_final)
            detail = ""
        else:
            # first tangential gradient below varsigma: the bound holds only
            # in its unsimplified telescoped form
            rhs1 = eta * (math.sqrt(gamma_final + vs) - math.sqrt(vs))
            detail = "telescoped form (first ||g_T||^2 < varsigma)"
        margin1 = lhs1 - rhs1
        out["adagrad_sum"] = AuditResult(margin1 > -AUDIT_SLACK * max(1.0, rhs1) and lhs1 > 0, margin1, detail)
        lhs2 = float(np.sum(alpha**2 * g2))
        rhs2 = eta**2 * math.log((gamma_final + vs) / vs)
        margin2 = rhs2 - lhs2
        out["adagrad_sq_sum"] = AuditResult(margin2 >= -AUDIT_SLACK * max(1.0, rhs2), margin2)
    else:
        out["adagrad_sum"] = AuditResult(True, math.inf, "no tangential progress")
        out["adagrad_sq_sum"] = AuditResult(True, math.inf, "no tangential progress")

    # (c) normal step length bound
    worst, bad = math.inf, []
    for rec in history:
        if rec.step_type != "normal" or rec.step_norm is None:
            continue
        bound = theta * rec.c_norm
        margin = bound - rec.step_norm
        worst = min(worst, margin)
        if margin < -AUDIT_SLACK * max(1.0, bound):
            bad.append(rec.k)
    out["normal_step_bound"] = AuditResult(not bad, worst, f"violations at k={bad}" if bad else "")

    # (d) recorded step type agrees with the switching test
    bad = []
    worst = math.inf
    for rec in history:
        if rec.step_type is None:
            continue
        rhs = beta * rec.alpha_T * rec.gT_norm
        take_t = rec.c_norm <= rhs
        if take_t != (rec.step_type == "tangential"):
            bad.append(rec.k)
        worst = min(worst, abs(rhs - rec.c_norm))
    out["switch_consistency"] = AuditResult(not bad, worst, f"mismatch at k={bad}" if bad else "")

    # (e) step sizes never grow over tangential iterations
    diffs = np.diff(alpha) if alpha.size > 1 else np.array([])
    bound_ok = bool(np.all(alpha <= eta / math.sqrt(vs) * (1 + AUDIT_SLACK)))
    worst = float(-diffs.max()) if diffs.size else math.inf
    bad = [tang[i + 1].k for i in np.nonzero(diffs > AUDIT_SLACK * alpha[:-1])[0]] if diffs.size else []
    out["alpha_monotone"] = AuditResult(not bad and bound_ok, worst, f"increase at k={bad}" if bad else "")
    return out


# ---------------------------------------------------------------------------
# serialization


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_history_csv(report: RunReport, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in report.history:
                w.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write history CSV to {path}: {exc}") from exc
    return path


def read_history_csv(path) -> list[dict]:
    """Parse a history CSV back into dicts of floats/ints (None for empty cells)."""
    rows = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, val in row.items():
                if val == "":
                    parsed[key] = None
                elif key in ("k", "backtracks"):
                    parsed[key] = int(val)
                elif key == "step_type":
                    parsed[key] = val
                else:
                    parsed[key] = float(val)
            rows.append(parsed)
    return rows


def _num(v):
    # JSON has no inf/nan; strings keep the values recoverable
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def report_to_dict(report: RunReport, history_csv: str | None = None, inline_history: bool = False) -> dict:
    st = report.status
    out = {
        "problem": report.problem,
        "n": report.n,
        "m": report.m,
        "status": {
            "kind": st.kind,
            "exitc": st.exitc,
            "k_final": st.k_final,
            "message": st.message,
        },
        "final": {
            "gT_norm": _num(st.gT_norm),
            "c_norm": _num(st.c_norm),
            "JTc_norm": _num(st.JTc_norm),
            "f": _num(st.f),
        },
        "x_final": [float(v) for v in report.x_final],
        "audit": {name: bool(a.passed) for name, a in report.audit.items()},
        "audit_margins": {name: _num(a.margin) for name, a in report.audit.items()},
        "config": report.config,
        "wall_time": report.wall_time,
        "objective_evals": report.objective_evals,
    }
    if history_csv is not None:
        out["history_csv"] = history_csv
    if inline_history:
        out["history"] = [{k: (_num(v) if isinstance(v, float) else v) for k, v in asdict(r).items()} for r in report.history]
    return out


def write_report_json(report: RunReport, path, history_csv: str | None = None, inline_history: bool = False) -> Path:
    path = Path(path)
    payload = report_to_dict(report, history_csv=history_csv, inline_history=inline_history)
    try:
        with path.open("w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write report JSON to {path}: {exc}") from exc
    return path


def read_report_json(path) -> dict:
    with Path(path).open() as fh:
        return json.load(fh)

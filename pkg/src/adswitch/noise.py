"""Relative Gaussian gradient noise and multi-run reliability studies.

Noise is multiplicative per component, ``g_i * (1 + level * z_i)`` with
``z`` standard normal.  Every run draws from its own Philox stream keyed by
``(seed, problem index, level index, run index)`` through
:class:`numpy.random.SeedSequence`, so a study gives the same numbers
whether cells run serially or on a thread pool.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import SUCCESS_KINDS
from .problems import ProblemInstance, eval_objective
from .solver import SolverConfig, solve

__all__ = [
    "NoiseSpec",
    "RunOutcome",
    "CellSummary",
    "StudySummary",
    "DEFAULT_LEVELS",
    "STUDY_EPSILON",
    "make_rng",
    "perturb_gradient",
    "run_seed",
    "run_study",
]

DEFAULT_LEVELS = (0.05, 0.15, 0.25, 0.50)
STUDY_EPSILON = 1e-3


@dataclass(frozen=True)
class NoiseSpec:
    level: float
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError(f"noise level must be nonnegative, got {self.level}")


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for ``seed`` and spawn key ``key``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def perturb_gradient(g, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if spec.level == 0:
        return g.copy()
    z = rng.standard_normal(g.shape)
    return g * (1.0 + spec.level * z)


def run_seed(seed: int, problem_index: int, level_index: int, run_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(problem_index, level_index, run_index))


@dataclass
class RunOutcome:
    problem: str
    level: float
    run: int
    kind: str
    iterations: int
    f: float
    gT_norm: float
    c_norm: float

    @property
    def success(self) -> bool:
        return self.kind in SUCCESS_KINDS


@dataclass
class CellSummary:
    problem: str
    n: int
    m: int
    level: float
    runs: int
    successes: int
    avg_f: float
    avg_gT_norm: float
    avg_c_norm: float
    avg_iterations: float
    outcomes: list[RunOutcome] = field(default_factory=list, repr=False)


@dataclass
class StudySummary:
    levels: list[float]
    runs_per_cell: int
    seed: int
    cells: list[CellSummary]

    def cell(self, problem: str, level: float) -> CellSummary:
        for c in self.cells:
            if c.problem == problem and c.level == level:
                return c
        raise KeyError((problem, level))

    def reliability(self) -> list[tuple[float, int, int]]:
        """Per level: (level, problems with no successful run, problems with all runs successful)."""
        rows = []
        for level in self.levels:
            cells = [c for c in self.cells if c.level == level]
            rows.append(
                (
                    level,
                    sum(c.successes == 0 for c in cells),
                    sum(c.successes == c.runs for c in cells),
                )
            )
        return rows

    def to_dict(self) -> dict:
        return {
            "levels": self.levels,
            "runs_per_cell": self.runs_per_cell,
            "seed": self.seed,
            "cells": [
                {k: (v if not isinstance(v, float) or math.isfinite(v) else None) for k, v in asdict(c).items() if k != "outcomes"}
                | {"outcomes": [asdict(o) for o in c.outcomes]}
                for c in self.cells
            ],
            "reliability": [
                {"level": lv, "total_failures": fail, "total_successes": ok}
                for lv, fail, ok in self.reliability()
            ],
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        with path.open("w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_json_default)
            fh.write("\n")
        return path

    def write_level_csv(self, level: float, path) -> Path:
        """One row per problem in the order: Problem, n, m, avr f, avr ||g_T||, avr ||c||, avr #its, #success."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["problem", "n", "m", "avg_f", "avg_gT_norm", "avg_c_norm", "avg_its", "successes"])
            for c in self.cells:
                if c.level != level:
                    continue
                w.writerow(
                    [
                        c.problem, c.n, c.m,
                        format(c.avg_f, ".6e"), format(c.avg_gT_norm, ".2e"),
                        format(c.avg_c_norm, ".2e"), format(c.avg_iterations, ".2e"),
                        c.successes,
                    ]
                )
        return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _single_run(problem: ProblemInstance, level: float, run: int, config: SolverConfig, ss: np.random.SeedSequence):
    spec = NoiseSpec(level)
    rng = np.random.Generator(np.random.Philox(ss))
    report = solve(problem, config, perturb=lambda g: perturb_gradient(g, spec, rng), audit=False)
    st = report.status
    f = st.f if st.f is not None else eval_objective(problem, report.x_final)
    return RunOutcome(problem.name, level, run, st.kind, st.k_final, f, st.gT_norm, st.c_norm)


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else math.nan


def run_study(
    problems: Sequence[ProblemInstance],
    levels: Sequence[float] = DEFAULT_LEVELS,
    runs_per_cell: int = 10,
    base_config: SolverConfig | None = None,
    seed: int = 0,
    workers: int = 1,
) -> StudySummary:
    """Solve every (problem, level) cell ``runs_per_cell`` times with independent noise.

    Averages are taken over the successful runs (NaN when there are none).
    ``base_config`` defaults to the study tolerance with the acceptable-value
    stopping rule switched on.
    """
    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be at least 1")
    levels = [float(lv) for lv in levels]
    for lv in levels:
        NoiseSpec(lv)
    config = base_config or SolverConfig(epsilon=STUDY_EPSILON, accept_rule=True)

    jobs = [
        (pi, li, r)
        for pi in range(len(problems))
        for li in range(len(levels))
        for r in range(runs_per_cell)
    ]

    def work(job):
        pi, li, r = job
        return _single_run(problems[pi], levels[li], r, config, run_seed(seed, pi, li, r))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, jobs))
    else:
        outcomes = [work(j) for j in jobs]
    by_job = dict(zip(jobs, outcomes))

    cells = []
    for pi, p in enumerate(problems):
        for li, lv in enumerate(levels):
            outs = [by_job[(pi, li, r)] for r in range(runs_per_cell)]
            ok = [o for o in outs if o.success]
            cells.append(
                CellSummary(
                    problem=p.name,
                    n=p.n,
                    m=p.m,
                    level=lv,
                    runs=runs_per_cell,
                    successes=len(ok),
                    avg_f=_mean([o.f for o in ok]),
                    avg_gT_norm=_mean([o.gT_norm for o in ok]),
                    avg_c_norm=_mean([o.c_norm for o in ok]),
                    avg_iterations=_mean([o.iterations for o in ok]),
                    outcomes=outs,
                )
            )
    return StudySummary(levels, runs_per_cell, seed, cells)

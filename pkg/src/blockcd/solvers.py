"""Solver drivers: the two BCD methods and three full-gradient baselines.

Every run produces a SolveTrace with one record per iteration.  BCD runs
enforce the sufficient-decrease guarantee

    F(x_{t+1}) - F(x_t) <= -(theta/2) * ||x_{t+1} - x_t||^2 + 1e-9

at runtime and raise MonotonicityBreach on violation.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import selection as sel
from .errors import InfeasibleStart, MonotonicityBreach, UnsupportedCombination
from .problems import (
    Family,
    FeasibleSet,
    ProblemInstance,
    composite_subgradient,
    curvature_matrix,
    eval_gradient_f,
    eval_objective,
    feasibility_residual,
    grad_smooth,
    nonsmooth_subgradient,
    power_iteration_norm,
    project,
)
from .subsolvers import block2_solver, sit_blockk_local

START_TOL = 1e-9
DECREASE_SLACK = 1e-9


class Method(enum.Enum):
    BCDG = "bcdg"
    BCDL = "bcdl"
    PSG = "psg"
    MSCR = "mscr"
    PDCA = "pdca"


@dataclass
class SolverConfig:
    method: Method
    max_iters: int = 2000
    tol: float = 1e-8
    window: int | None = None  # stall window; defaults to max(50, n)
    selection: sel.SelectionKind = sel.SelectionKind.UNIFORM_RANDOM
    seed: int = 0
    k: int = 2  # BCDL block size
    mscr_outer: int = 10
    pdca_L: float | str = "auto"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.method is Method.BCDL and not 2 <= self.k <= 20:
            raise ValueError("BCDL needs 2 <= k <= 20")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    elapsed_s: float
    objective: float
    step_norm: float
    feas_residual: float


@dataclass
class SolveTrace:
    records: list
    final_x: np.ndarray
    converged: bool
    iterates: list = field(default_factory=list)

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective if self.records else float("nan")

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])


class _StallDetector:
    """Stops when the running best objective improves by less than tol
    (relative) over the last `window` iterations."""

    def __init__(self, window: int, tol: float):
        self.window = window
        self.tol = tol
        self.best_hist: list = []

    def update(self, f_val: float) -> bool:
        best = min(f_val, self.best_hist[-1]) if self.best_hist else f_val
        self.best_hist.append(best)
        if len(self.best_hist) <= self.window:
            return False
        ref = self.best_hist[-1 - self.window]
        return (ref - best) < self.tol * (1.0 + abs(ref))


def _check_start(fs: FeasibleSet, x0: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    res = feasibility_residual(fs, x0)
    if res > START_TOL:
        raise InfeasibleStart(f"x0 has feasibility residual {res:.3e} > {START_TOL}")
    return x0.copy()


def bcd_run(
    p: ProblemInstance,
    fs: FeasibleSet,
    cfg: SolverConfig,
    x0: np.ndarray,
    clock=time.monotonic,
    keep_iterates: bool = False,
) -> SolveTrace:
    """Block coordinate descent with global pairwise steps (BCDG) or the
    local block-k solver (BCDL, SIT only)."""
    if cfg.method not in (Method.BCDG, Method.BCDL):
        raise ValueError(f"bcd_run got method {cfg.method}")
    if cfg.method is Method.BCDL and p.family is not Family.SIT:
        raise UnsupportedCombination("BCD-l-k is available for the SIT family only")
    x = _check_start(fs, x0)
    k = 2 if cfg.method is Method.BCDG else cfg.k
    qbar = curvature_matrix(p)
    strat = sel.SelectionStrategy(cfg.selection, cfg.seed)
    solver2 = block2_solver(p)
    semi = cfg.selection in (
        sel.SelectionKind.SEMI_GREEDY_SIT,
        sel.SelectionKind.SEMI_GREEDY_NNSPCA,
    )

    f_cur = eval_objective(p, x)
    stall = _StallDetector(cfg.window if cfg.window is not None else max(50, p.n), cfg.tol)
    records: list = []
    iterates: list = []
    converged = False
    t0 = clock()

    for t in range(cfg.max_iters):
        grad = eval_gradient_f(p, x)
        gsel = composite_subgradient(p, x) if semi else None
        B = strat.next_working_set(t, x, g=gsel, L=qbar, k=k)
        if cfg.method is Method.BCDG:
            step = solver2(p, qbar, x, grad, int(B[0]), int(B[1]))
        else:
            step = sit_blockk_local(p, qbar, x, grad, B)
        x[step.working_set] += step.d
        f_new = eval_objective(p, x)
        drop = f_new - f_cur
        if drop > -(p.theta / 2.0) * step.step_norm**2 + DECREASE_SLACK:
            raise MonotonicityBreach(
                f"iteration {t}: decrease {drop:.3e} vs bound "
                f"{-(p.theta / 2.0) * step.step_norm ** 2:.3e}"
            )
        f_cur = f_new
        records.append(
            TraceRecord(t, clock() - t0, f_cur, step.step_norm, feasibility_residual(fs, x))
        )
        if keep_iterates:
            iterates.append(x.copy())
        if stall.update(f_cur):
            converged = True
            break

    return SolveTrace(records, x, converged, iterates)


def psg_run(
    p: ProblemInstance,
    fs: FeasibleSet,
    cfg: SolverConfig,
    x0: np.ndarray,
    clock=time.monotonic,
    keep_iterates: bool = False,
) -> SolveTrace:
    """Projected subgradient descent with step 0.01/sqrt(t), t from 1."""
    x = _check_start(fs, x0)
    stall = _StallDetector(cfg.window if cfg.window is not None else max(50, p.n), cfg.tol)
    records: list = []
    iterates: list = []
    converged = False
    t0 = clock()
    for t in range(1, cfg.max_iters + 1):
        g = composite_subgradient(p, x)
        x_new = project(fs, x - (0.01 / np.sqrt(t)) * g)
        step_norm = float(np.linalg.norm(x_new - x))
        x = x_new
        f_cur = eval_objective(p, x)
        records.append(
            TraceRecord(t - 1, clock() - t0, f_cur, step_norm, feasibility_residual(fs, x))
        )
        if keep_iterates:
            iterates.append(x.copy())
        if stall.update(f_cur):
            converged = True
            break
    return SolveTrace(records, x, converged, iterates)


def _smooth_hessian_norm(p: ProblemInstance) -> float:
    if p.family in (Family.SIT, Family.DCPB2):
        return power_iteration_norm(p.AtA)
    if p.family is Family.NNSPCA:
        return power_iteration_norm(p.Qhat)
    return 0.0  # DCPB1: f is linear


def mscr_run(
    p: ProblemInstance,
    fs: FeasibleSet,
    cfg: SolverConfig,
    x0: np.ndarray,
    clock=time.monotonic,
    keep_iterates: bool = False,
) -> SolveTrace:
    """Multi-stage convex relaxation.

    Each of the K = cfg.mscr_outer stages freezes the nonsmooth
    subgradient at the current point and runs 10 projected-gradient steps
    on the convex surrogate f(z) + <z - x_t, fix>, step 1/L with L the
    power-iteration norm of f's Hessian (floored at 1 for linear f).
    """
    x = _check_start(fs, x0)
    L = max(_smooth_hessian_norm(p), 1.0e-10)
    if L < 1e-9:
        L = 1.0  # linear smooth part: any positive step is valid
    records: list = []
    iterates: list = []
    t0 = clock()
    for stage in range(cfg.mscr_outer):
        fix = nonsmooth_subgradient(p, x)
        z = x.copy()
        for _ in range(10):
            z = project(fs, z - (grad_smooth(p, z) + fix) / L)
        x_new = project(fs, z)
        step_norm = float(np.linalg.norm(x_new - x))
        x = x_new
        records.append(
            TraceRecord(
                stage, clock() - t0, eval_objective(p, x), step_norm, feasibility_residual(fs, x)
            )
        )
        if keep_iterates:
            iterates.append(x.copy())
    return SolveTrace(records, x, True, iterates)


def pdca_run(
    p: ProblemInstance,
    fs: FeasibleSet,
    cfg: SolverConfig,
    x0: np.ndarray,
    clock=time.monotonic,
    keep_iterates: bool = False,
) -> SolveTrace:
    """Proximal DC algorithm: x+ = P(x - (grad f + subgrad g)/L)."""
    x = _check_start(fs, x0)
    if isinstance(cfg.pdca_L, str):
        L = _smooth_hessian_norm(p) * 1.1
        if L < 1e-9:
            L = 1.0
    else:
        L = float(cfg.pdca_L)
    stall = _StallDetector(cfg.window if cfg.window is not None else max(50, p.n), cfg.tol)
    records: list = []
    iterates: list = []
    converged = False
    t0 = clock()
    for t in range(cfg.max_iters):
        g = composite_subgradient(p, x)
        x_new = project(fs, x - g / L)
        step_norm = float(np.linalg.norm(x_new - x))
        x = x_new
        f_cur = eval_objective(p, x)
        records.append(
            TraceRecord(t, clock() - t0, f_cur, step_norm, feasibility_residual(fs, x))
        )
        if keep_iterates:
            iterates.append(x.copy())
        if stall.update(f_cur):
            converged = True
            break
    return SolveTrace(records, x, converged, iterates)


_RUNNERS = {
    Method.BCDG: bcd_run,
    Method.BCDL: bcd_run,
    Method.PSG: psg_run,
    Method.MSCR: mscr_run,
    Method.PDCA: pdca_run,
}


def run_solver(p, fs, cfg, x0, clock=time.monotonic, keep_iterates=False) -> SolveTrace:
    """Dispatch on cfg.method."""
    return _RUNNERS[cfg.method](p, fs, cfg, x0, clock=clock, keep_iterates=keep_iterates)


def hybrid_run(
    first: SolverConfig,
    then_bcd: SolverConfig,
    p: ProblemInstance,
    fs: FeasibleSet,
    x0: np.ndarray,
    clock=time.monotonic,
) -> tuple:
    """Run `first`, then restart a BCD method from its final point."""
    tr1 = run_solver(p, fs, first, x0, clock=clock)
    tr2 = bcd_run(p, fs, then_bcd, tr1.final_x, clock=clock)
    return tr1, tr2

"""Mechanical checkers for the library's testable optimality theory.

Pointwise stationarity probing over working sets, the mean-step-norm
residual, enumeration identities for uniformly random working sets, and
the three solution-geometry checkers (sparsity exactness, extreme points,
binary exactness).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import TooManyBlocks, UnsupportedCombination
from .problems import (
    CurvatureMatrix,
    Family,
    FeasibleSet,
    ProblemInstance,
    curvature_matrix,
    eval_gradient_f,
    top_s_norm,
)
from .selection import enumerate_working_sets
from .subsolvers import block2_solver, sit_blockk_local

CWS_TOL = 1e-8
GEOMETRY_TOL = 1e-6


@dataclass(frozen=True)
class CwsReport:
    is_cws: bool
    worst_block: np.ndarray
    worst_improvement: float
    blocks_probed: int


def _all_blocks(n, k):
    import itertools

    return [np.array(B, dtype=int) for B in itertools.combinations(range(n), k)]


def _blocks_for(p: ProblemInstance, x, k, mode, count, seed):
    n = len(x)
    if mode == "exhaustive":
        if comb(n, k) > 10**5:
            raise TooManyBlocks(f"C({n},{k}) exceeds the exhaustive probing budget")
        return _all_blocks(n, k)
    if mode != "sampled":
        raise ValueError(f"mode must be 'exhaustive' or 'sampled', got {mode!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    return [np.sort(rng.choice(n, size=k, replace=False)) for _ in range(count)]


def _solve_block(p, qbar, x, grad, B):
    if len(B) == 2:
        return block2_solver(p)(p, qbar, x, grad, int(B[0]), int(B[1]))
    if p.family is Family.SIT:
        return sit_blockk_local(p, qbar, x, grad, B)
    raise UnsupportedCombination("block-k probing beyond k = 2 exists for SIT only")


def probe_cws(
    p: ProblemInstance,
    fs: FeasibleSet,
    x: np.ndarray,
    k: int = 2,
    mode: str = "exhaustive",
    count: int = 200,
    seed: int = 0,
) -> CwsReport:
    """Probe whether any working set of size k admits an improving step."""
    x = np.asarray(x, dtype=float)
    qbar = curvature_matrix(p)
    grad = eval_gradient_f(p, x)
    blocks = _blocks_for(p, x, k, mode, count, seed)
    worst = 0.0
    worst_block = blocks[0]
    for B in blocks:
        step = _solve_block(p, qbar, x, grad, B)
        if -step.objective_delta > worst:
            worst = -step.objective_delta
            worst_block = B
    return CwsReport(worst <= CWS_TOL, np.asarray(worst_block), worst, len(blocks))


def residual_R(p: ProblemInstance, fs: FeasibleSet, x: np.ndarray, k: int = 2) -> float:
    """Mean optimal block step norm over all C(n, k) working sets."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if comb(n, k) > 10**5:
        raise TooManyBlocks(f"C({n},{k}) exceeds the enumeration budget")
    qbar = curvature_matrix(p)
    grad = eval_gradient_f(p, x)
    norms = [_solve_block(p, qbar, x, grad, B).step_norm for B in _all_blocks(n, k)]
    return float(np.mean(norms))


# ---------------------------------------------------------------------------
# enumeration identities for uniformly random working sets
# ---------------------------------------------------------------------------

def verify_expectation_identities(n: int, k: int, trials: int, seed: int = 0) -> dict:
    """Check the four exact expectation identities over all C(n, k) sets.

    For random x, d and the separable convex h(x) = sum(|x_i|):

      (i)   mean <x_B, d_B>            = (k/n) <x, d>
      (ii)  mean <U_B x_B, d>          = (k/n) <x, d>
      (iii) mean ||x + U_B d_B||^2     = (1 - k/n)||x||^2 + (k/n)||x + d||^2
      (v)   mean h(x + U_B d_B)        = (k/n) h(x + d) + (1 - k/n) h(x)

    Returns the maximum relative error per identity and a pass flag at
    1e-10 relative tolerance.
    """
    if n > 8 or k > 3 or k > n:
        raise ValueError("identity suite is sized for n <= 8, k <= 3")
    rng = np.random.Generator(np.random.Philox(seed))
    blocks = enumerate_working_sets(n, k)
    frac = k / n
    errs = {"i": 0.0, "ii": 0.0, "iii": 0.0, "v": 0.0}

    def rel(lhs, rhs):
        return abs(lhs - rhs) / (1.0 + abs(rhs))

    for _ in range(trials):
        x = rng.normal(size=n)
        d = rng.normal(size=n)
        m_i = np.mean([x[B] @ d[B] for B in blocks])
        m_ii = m_i  # <U_B x_B, d> = <x_B, d_B> entrywise
        m_iii = 0.0
        m_v = 0.0
        for B in blocks:
            z = x.copy()
            z[B] += d[B]
            m_iii += z @ z
            m_v += np.abs(z).sum()
        m_iii /= len(blocks)
        m_v /= len(blocks)
        errs["i"] = max(errs["i"], rel(m_i, frac * (x @ d)))
        errs["ii"] = max(errs["ii"], rel(m_ii, frac * (x @ d)))
        xd = x + d
        errs["iii"] = max(errs["iii"], rel(m_iii, (1 - frac) * (x @ x) + frac * (xd @ xd)))
        errs["v"] = max(
            errs["v"], rel(m_v, frac * np.abs(xd).sum() + (1 - frac) * np.abs(x).sum())
        )
    return {
        "n": n,
        "k": k,
        "trials": trials,
        "max_rel_errors": errs,
        "pass": all(e <= 1e-10 for e in errs.values()),
    }


def block_curvature_expectation(Q: np.ndarray, k: int, theta: float):
    """Enumerate E[U_B U_B' Q U_B U_B'] + theta*I and its sandwich constants.

    Returns (E_matrix, c1, c2) with c1 = (k/n) * min_B ||Q_BB|| + theta and
    c2 = (k/n) * max_B ||Q_BB|| + theta (spectral norms).
    """
    n = Q.shape[0]
    blocks = enumerate_working_sets(n, k)
    E = np.zeros_like(Q)
    h_low, h_high = np.inf, -np.inf
    for B in blocks:
        mask = np.zeros(n)
        mask[B] = 1.0
        E += Q * np.outer(mask, mask)
        norm = float(np.linalg.norm(Q[np.ix_(B, B)], 2))
        h_low = min(h_low, norm)
        h_high = max(h_high, norm)
    E /= len(blocks)
    E += theta * np.eye(n)
    frac = k / n
    return E, frac * h_low + theta, frac * h_high + theta


# ---------------------------------------------------------------------------
# geometry checkers
# ---------------------------------------------------------------------------

def check_sit_exactness(p: ProblemInstance, x: np.ndarray, tol: float = GEOMETRY_TOL) -> dict:
    """Large-penalty exactness check for SIT stationary points.

    When lam > 2*||grad f(x)||_inf, an exact pairwise-stationary point must
    carry no mass outside its top-s support and must have equal smooth
    gradient entries across the nonzero support.  Reports raw witnesses so
    callers can apply their own thresholds.
    """
    x = np.asarray(x, dtype=float)
    grad = eval_gradient_f(p, x)
    threshold = 2.0 * float(np.abs(grad).max())
    active = p.lam > threshold
    gap = float(np.abs(x).sum() - top_s_norm(x, p.s))
    support = np.nonzero(np.abs(x) > tol)[0]
    spread = 0.0
    if len(support) >= 2:
        gs = grad[support]
        spread = float(gs.max() - gs.min())
    report = {
        "active": active,
        "threshold": threshold,
        "sparsity_gap": gap,
        "grad_spread": spread,
        "support_size": int(len(support)),
    }
    report["pass"] = (not active) or (gap <= tol and spread <= tol)
    return report


def check_extreme_point(x: np.ndarray, tol: float = GEOMETRY_TOL) -> bool:
    """True iff every |x_r| lies in [1 - tol, 1 + tol] (vacuous when empty)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return True
    return bool(np.all(np.abs(np.abs(x) - 1.0) <= tol))


def check_dcpb2_exactness(
    p: ProblemInstance, qbar: CurvatureMatrix, x: np.ndarray, tol: float = GEOMETRY_TOL
) -> dict:
    """Binary-exactness regimes driven by phi = max(Qbar) - min(Qbar).

    lam > phi*sqrt(n+2): stationary points must be binary (+-1 entries);
    lam > phi*sqrt(n): every entry must be nonzero.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    q = qbar.qbar
    phi = float(q.max() - q.min())
    if p.lam > phi * np.sqrt(n + 2):
        regime = "binary"
        ok = check_extreme_point(x, tol)
    elif p.lam > phi * np.sqrt(n):
        regime = "nonzero"
        ok = bool(np.abs(x).min() > tol)
    else:
        regime = "inactive"
        ok = True
    return {
        "phi": phi,
        "regime": regime,
        "pass": ok,
        "min_abs_entry": float(np.abs(x).min()) if n else 0.0,
        "max_dev_from_one": float(np.abs(np.abs(x) - 1.0).max()) if n else 0.0,
    }

"""Problem families, feasible sets, and first-order building blocks.

Four composite objectives F(x) = f(x) + h(x) + g(x), each restricted to one
coupling equality that forces coordinates to move together:

* SIT      0.5*||Ax - y||^2 + I(x >= 0) - lam*top_s(x)        on  ||x||_1 = 1
* NNSPCA   0.5*x'Qhat x + I(x >= 0) + lam*(sum(x) - top_s(x)) on  ||x||_2 = 1
* DCPB1    p'x + I(-1 <= x <= 1) - 0.5*x'Qhat x               on  sum(x) = c
* DCPB2    0.5*||Ax - y||^2 + I(-1 <= x <= 1) - lam*||x||_2   on  sum(x) = c

with Qhat = -A'A + gamma*I (NNSPCA) or gamma*I - A'A with gamma = 2*lam
(DCPB1), both positive semidefinite, and p = -A'y.  top_s(x) is the sum of
the s largest entries of x by magnitude.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateProjection,
    InfeasibleIndicator,
    InfeasibleTarget,
)

INDICATOR_TOL = 1e-9
PROJECTION_TOL = 1e-10


class Family(enum.Enum):
    SIT = "SIT"
    NNSPCA = "NNSPCA"
    DCPB1 = "DCPB1"
    DCPB2 = "DCPB2"


class SetKind(enum.Enum):
    SIMPLEX = "simplex"
    NONNEG_SPHERE = "nonneg_sphere"
    BOX_HYPERPLANE = "box_hyperplane"


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def power_iteration_norm(M: np.ndarray, iters: int = 200, tol: float = 1e-8) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic start vector; stops early when the Rayleigh quotient
    stabilizes to relative tolerance `tol`.
    """
    n = M.shape[0]
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = M @ v
        nw = np.linalg.norm(w)
        if nw <= 1e-300:
            return 0.0
        v = w / nw
        new_est = float(v @ (M @ v))
        if abs(new_est - est) <= tol * max(1.0, abs(new_est)):
            return new_est
        est = new_est
    return est


@dataclass(frozen=True)
class ProblemInstance:
    """One of the four applications, bundling data and penalty parameters.

    Immutable after construction; derived matrices are cached lazily and
    shared safely across concurrent solver runs.
    """

    family: Family
    A: np.ndarray
    y: np.ndarray
    lam: float
    s: int
    c: float
    gamma: float
    theta: float

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @cached_property
    def AtA(self) -> np.ndarray:
        return _frozen_array(self.A.T @ self.A)

    @cached_property
    def Qhat(self) -> np.ndarray:
        if self.family is Family.NNSPCA:
            return _frozen_array(self.gamma * np.eye(self.n) - self.AtA)
        if self.family is Family.DCPB1:
            return _frozen_array(self.gamma * np.eye(self.n) - self.AtA)
        raise ValueError(f"Qhat undefined for family {self.family}")

    @cached_property
    def p_lin(self) -> np.ndarray:
        if self.family is not Family.DCPB1:
            raise ValueError("p_lin only defined for DCPB1")
        return _frozen_array(-self.A.T @ self.y)

    @cached_property
    def Q(self) -> np.ndarray:
        """Curvature base matrix: per-family Q with Qbar = Q + theta*I."""
        if self.family in (Family.SIT, Family.DCPB2):
            return self.AtA
        if self.family is Family.NNSPCA:
            return self.Qhat
        return _frozen_array(-self.Qhat)  # DCPB1


def _resolve_gamma(A: np.ndarray, gamma) -> float:
    if isinstance(gamma, str):
        if gamma != "auto":
            raise ValueError(f"gamma must be a float or 'auto', got {gamma!r}")
        return power_iteration_norm(A.T @ A) + 1e-6
    return float(gamma)


def _validate_common(A: np.ndarray, lam: float, s: int, theta: float) -> None:
    m, n = A.shape
    if m < 1 or n < 2:
        raise ValueError(f"need m >= 1 and n >= 2, got shape {A.shape}")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if not 0 <= s <= n:
        raise ValueError(f"sparsity s must be in [0, {n}], got {s}")


def sit_problem(A, y, lam: float, s: int, theta: float = 1e-4) -> ProblemInstance:
    A = _frozen_array(A)
    y = _frozen_array(y)
    _validate_common(A, lam, s, theta)
    return ProblemInstance(Family.SIT, A, y, float(lam), int(s), 0.0, 0.0, float(theta))


def nnspca_problem(A, lam: float, s: int, gamma="auto", theta: float = 1e-4) -> ProblemInstance:
    A = _frozen_array(A)
    _validate_common(A, lam, s, theta)
    g = _resolve_gamma(A, gamma)
    top = power_iteration_norm(A.T @ A)
    if g < top - 1e-8 * max(1.0, top):
        raise ValueError(f"gamma={g} too small: Qhat = gamma*I - A'A not PSD (|A'A| ~ {top})")
    return ProblemInstance(
        Family.NNSPCA, A, _frozen_array(np.zeros(0)), float(lam), int(s), 0.0, g, float(theta)
    )


def dcpb1_problem(A, y, lam="auto", c: float = 0.0, theta: float = 1e-4) -> ProblemInstance:
    A = _frozen_array(A)
    y = _frozen_array(y)
    if isinstance(lam, str):
        gamma = _resolve_gamma(A, lam)  # gamma = 2*lam
        lam_val = gamma / 2.0
    else:
        lam_val = float(lam)
        gamma = 2.0 * lam_val
    _validate_common(A, lam_val, 0, theta)
    top = power_iteration_norm(A.T @ A)
    if gamma < top - 1e-8 * max(1.0, top):
        raise ValueError(f"2*lam={gamma} too small: Qhat = 2*lam*I - A'A not PSD")
    return ProblemInstance(Family.DCPB1, A, y, lam_val, 0, float(c), gamma, float(theta))


def dcpb2_problem(A, y, lam: float, c: float = 0.0, theta: float = 1e-4) -> ProblemInstance:
    A = _frozen_array(A)
    y = _frozen_array(y)
    _validate_common(A, lam, 0, theta)
    return ProblemInstance(Family.DCPB2, A, y, float(lam), 0, float(c), 0.0, float(theta))


@dataclass(frozen=True)
class FeasibleSet:
    """Tagged description of the coupling constraint set."""

    kind: SetKind
    c: float = 0.0


def feasible_set_for(p: ProblemInstance) -> FeasibleSet:
    if p.family is Family.SIT:
        return FeasibleSet(SetKind.SIMPLEX)
    if p.family is Family.NNSPCA:
        return FeasibleSet(SetKind.NONNEG_SPHERE)
    return FeasibleSet(SetKind.BOX_HYPERPLANE, p.c)


@dataclass(frozen=True)
class CurvatureMatrix:
    """Qbar = Q + theta*I for the family's curvature base Q.

    Off-diagonal entries of Qbar double as the coordinate Lipschitz
    constants used by the semi-greedy selector.
    """

    qbar: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.qbar, dtype=float)
        scale = max(1.0, float(np.abs(q).max()) if q.size else 1.0)
        if q.shape[0] != q.shape[1] or np.abs(q - q.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("curvature matrix must be symmetric to 1e-12 relative")
        object.__setattr__(self, "qbar", _frozen_array(q))


def curvature_matrix(p: ProblemInstance) -> CurvatureMatrix:
    return CurvatureMatrix(p.Q + p.theta * np.eye(p.n))


def curvature_alpha(qbar: CurvatureMatrix, i: int, j: int) -> float:
    """Directional curvature along e_i - e_j: Qbar_ii + Qbar_jj - 2*Qbar_ij."""
    if i == j:
        raise ValueError("curvature_alpha needs i != j")
    q = qbar.qbar
    return float(q[i, i] + q[j, j] - 2.0 * q[i, j])


# ---------------------------------------------------------------------------
# top-s norm and its subgradient
# ---------------------------------------------------------------------------

def top_s_norm(x: np.ndarray, s: int) -> float:
    """Sum of the s largest entries of x by absolute value."""
    n = len(x)
    if not 0 <= s <= n:
        raise ValueError(f"s must be in [0, {n}]")
    if s == 0:
        return 0.0
    ax = np.abs(x)
    if s == n:
        return float(ax.sum())
    return float(np.partition(ax, n - s)[n - s :].sum())


def top_s_support(x: np.ndarray, s: int) -> np.ndarray:
    """Tie-broken top-s index set (ties go to the lower index)."""
    n = len(x)
    if not 0 <= s <= n:
        raise ValueError(f"s must be in [0, {n}]")
    if s == 0:
        return np.zeros(0, dtype=int)
    order = np.argsort(-np.abs(x), kind="stable")
    return np.sort(order[:s])


def subgrad_top_s(x: np.ndarray, s: int) -> np.ndarray:
    """Subgradient of top_s_norm: sign(x_i) on the support, 0 elsewhere.

    At zero entries the deterministic choice 0 (a valid element of [-1, 1])
    keeps oracle comparisons reproducible.
    """
    g = np.zeros(len(x))
    sup = top_s_support(x, s)
    g[sup] = np.sign(x[sup])
    return g


# ---------------------------------------------------------------------------
# objective / gradients
# ---------------------------------------------------------------------------

def _check_indicator(p: ProblemInstance, x: np.ndarray) -> None:
    if p.family in (Family.SIT, Family.NNSPCA):
        worst = float(np.min(x, initial=0.0))
        if worst < -INDICATOR_TOL:
            raise InfeasibleIndicator(f"x >= 0 violated by {-worst:.3e}")
    else:
        over = float(np.max(np.abs(x), initial=0.0)) - 1.0
        if over > INDICATOR_TOL:
            raise InfeasibleIndicator(f"-1 <= x <= 1 violated by {over:.3e}")


def eval_objective(p: ProblemInstance, x: np.ndarray) -> float:
    """F(x) = f(x) + h(x) + g(x); indicator terms contribute 0 within 1e-9.

    Raises InfeasibleIndicator when a hard indicator is violated beyond
    tolerance (the mathematical value there is +inf).
    """
    x = np.asarray(x, dtype=float)
    _check_indicator(p, x)
    if p.family is Family.SIT:
        r = p.A @ x - p.y
        return float(0.5 * (r @ r) - p.lam * top_s_norm(x, p.s))
    if p.family is Family.NNSPCA:
        return float(0.5 * (x @ (p.Qhat @ x)) + p.lam * (x.sum() - top_s_norm(x, p.s)))
    if p.family is Family.DCPB1:
        return float(p.p_lin @ x - 0.5 * (x @ (p.Qhat @ x)))
    r = p.A @ x - p.y
    return float(0.5 * (r @ r) - p.lam * np.linalg.norm(x))


def eval_gradient_f(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Gradient of the smooth part driving the block subsolvers.

    SIT / DCPB2: A'(Ax - y); NNSPCA: Qhat x; DCPB1: gradient of
    fhat(x) = p'x - 0.5 x'Qhat x, i.e. p - Qhat x.
    """
    x = np.asarray(x, dtype=float)
    if p.family in (Family.SIT, Family.DCPB2):
        return p.A.T @ (p.A @ x - p.y)
    if p.family is Family.NNSPCA:
        return p.Qhat @ x
    return p.p_lin - p.Qhat @ x


def grad_smooth(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Gradient of the convex smooth term f alone (DCPB1: constant p)."""
    if p.family is Family.DCPB1:
        return p.p_lin.copy()
    return eval_gradient_f(p, x)


def nonsmooth_subgradient(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Subgradient of h_linear + g (indicator parts contribute 0)."""
    x = np.asarray(x, dtype=float)
    if p.family is Family.SIT:
        return -p.lam * subgrad_top_s(x, p.s)
    if p.family is Family.NNSPCA:
        return p.lam * (np.ones(p.n) - subgrad_top_s(x, p.s))
    if p.family is Family.DCPB1:
        return -(p.Qhat @ x)
    nx = np.linalg.norm(x)
    if nx <= 1e-15:
        return np.zeros(p.n)
    return -p.lam * x / nx


def composite_subgradient(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """A subgradient of F at x used by PSG/PDCA and the selectors.

    Uses subgrad_top_s for the -lam*top_s term and 0 for indicator
    subgradients at feasible points.
    """
    return grad_smooth(p, x) + nonsmooth_subgradient(p, x)


# ---------------------------------------------------------------------------
# projections and residuals
# ---------------------------------------------------------------------------

def _project_simplex(x: np.ndarray) -> np.ndarray:
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(x) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(x - tau, 0.0)


def _project_nonneg_sphere(x: np.ndarray) -> np.ndarray:
    z = np.maximum(x, 0.0)
    nz = np.linalg.norm(z)
    if nz <= 1e-300:
        raise DegenerateProjection("no positive mass to project onto the sphere")
    return z / nz


def _project_box_hyperplane(x: np.ndarray, c: float) -> np.ndarray:
    n = len(x)
    if abs(c) > n:
        raise InfeasibleTarget(f"|c| = {abs(c)} exceeds n = {n}")
    # sum(clip(x - mu, -1, 1)) is non-increasing in mu; bisect on mu.
    lo = float(np.min(x)) - 1.0 - 1.0
    hi = float(np.max(x)) + 1.0 + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = float(np.clip(x - mid, -1.0, 1.0).sum())
        if s > c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    out = np.clip(x - 0.5 * (lo + hi), -1.0, 1.0)
    if abs(out.sum() - c) > PROJECTION_TOL:
        raise InfeasibleTarget(f"bisection failed to meet the sum target {c}")
    return out


def project(fs: FeasibleSet, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the feasible set."""
    x = np.asarray(x, dtype=float)
    if fs.kind is SetKind.SIMPLEX:
        return _project_simplex(x)
    if fs.kind is SetKind.NONNEG_SPHERE:
        return _project_nonneg_sphere(x)
    return _project_box_hyperplane(x, fs.c)


def feasibility_residual(fs: FeasibleSet, x: np.ndarray) -> float:
    """Nonnegative residual; 0 exactly on the feasible set."""
    x = np.asarray(x, dtype=float)
    neg = float(np.maximum(-x, 0.0).sum())
    if fs.kind is SetKind.SIMPLEX:
        return abs(float(np.abs(x).sum()) - 1.0) + neg
    if fs.kind is SetKind.NONNEG_SPHERE:
        return abs(float(x @ x) - 1.0) + neg
    box = float(np.maximum(np.abs(x) - 1.0, 0.0).sum())
    return abs(float(x.sum()) - fs.c) + box

"""Closed-form real roots of polynomials up to degree four.

Quartics are solved with Ferrari's resolvent-cubic construction, cubics
with Cardano's formula (trigonometric branch for three real roots), and
quadratics with the numerically stable two-term formula.  Candidates are
carried in complex arithmetic and polished with complex Newton steps
before the real/complex classification, which keeps near-double real
roots (whose raw candidates acquire spurious imaginary parts) while still
rejecting genuine complex pairs.  Surviving roots are polished against
the original polynomial and validated against a residual bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroCoefficients

# relative threshold below which a leading coefficient is treated as zero
DEGENERATE_LEAD_TOL = 1e-12
# polished candidates with |imag| <= 1e-8 * (1 + |real|) count as real
IMAG_TOL = 1e-8
DEDUP_TOL = 1e-9
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class RootSet:
    """Real roots (sorted ascending, near-duplicates collapsed).

    residual_bound is the largest |p(r)| observed over the reported roots.
    """

    roots: np.ndarray
    degree: int
    residual_bound: float

    def __post_init__(self):
        r = np.asarray(self.roots, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "roots", r)


def _polyval(coeffs, x):
    out = 0.0
    for c in coeffs:
        out = out * x + c
    return out


def _polyder(coeffs):
    deg = len(coeffs) - 1
    return [c * (deg - k) for k, c in enumerate(coeffs[:-1])]


def _quad_candidates(a: float, b: float, c: float) -> list:
    # a x^2 + b x + c with a != 0; both roots, possibly complex
    disc = b * b - 4.0 * a * c
    if disc >= 0.0:
        sq = np.sqrt(disc)
        q = -0.5 * (b + sq) if b >= 0.0 else -0.5 * (b - sq)
        out = [complex(q / a)]
        out.append(complex(c / q) if abs(q) > 0.0 else complex(0.0))
        return out
    im = np.sqrt(-disc) / (2.0 * a)
    re = -b / (2.0 * a)
    return [complex(re, im), complex(re, -im)]


def _cubic_real_roots(a: float, b: float, c: float, d: float) -> list:
    # real roots of a x^3 + b x^2 + c x + d with a != 0; near the
    # double-root boundary candidates from both branches are emitted,
    # then every candidate is polished against the cubic and only
    # genuine roots survive
    coeffs = [a, b, c, d]
    b, c, d = b / a, c / a, d / a
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    scale = max(1.0, abs(p), abs(q))
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    ts: list = []
    if disc > 0.0:
        sq = np.sqrt(disc)
        ts.append(float(np.cbrt(-q / 2.0 + sq) + np.cbrt(-q / 2.0 - sq)))
    else:
        if p < 0.0:
            m = 2.0 * np.sqrt(-p / 3.0)
            arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
            phi = np.arccos(arg) / 3.0
            ts.extend(float(m * np.cos(phi - 2.0 * np.pi * k / 3.0)) for k in range(3))
        else:
            ts.append(0.0)
    if abs(disc) <= 1e-8 * scale**2:
        if abs(p) > 1e-14 * scale:
            ts.extend([3.0 * q / p, -1.5 * q / p])
        else:
            ts.append(0.0)

    deriv = _polyder(coeffs)
    cmax = max(abs(v) for v in coeffs)
    out = []
    fallback = None
    for t in ts:
        r = t - shift
        best_r, best_res = r, abs(_polyval(coeffs, r))
        for _ in range(10):
            dp = _polyval(deriv, r)
            if abs(dp) <= 1e-300:
                break
            r = r - _polyval(coeffs, r) / dp
            res = abs(_polyval(coeffs, r))
            if res < best_res:
                best_r, best_res = r, res
        if fallback is None or best_res < fallback[1]:
            fallback = (best_r, best_res)
        if best_res <= 1e-9 * cmax * (1.0 + abs(best_r)) ** 3:
            out.append(best_r)
    if not out and fallback is not None:
        out.append(fallback[0])
    return out


def _cubic_candidates(a, b, c, d) -> list:
    return [complex(t) for t in _cubic_real_roots(a, b, c, d)]


def _quartic_candidates(a: float, b: float, c: float, d: float, e: float) -> list:
    # a x^4 + b x^3 + c x^2 + d x + e with a != 0 (Ferrari)
    b, c, d, e = b / a, c / a, d / a, e / a
    shift = b / 4.0
    # depressed quartic y^4 + p y^2 + q y + r
    p = c - 3.0 * b * b / 8.0
    q = d - b * c / 2.0 + b**3 / 8.0
    r = e - b * d / 4.0 + b * b * c / 16.0 - 3.0 * b**4 / 256.0
    scale = max(1.0, abs(p), abs(q), abs(r))
    ys: list = []
    if abs(q) <= 1e-14 * scale:
        # biquadratic: z^2 + p z + r with z = y^2
        for z in _quad_candidates(1.0, p, r):
            sq = np.sqrt(z)
            ys.extend([sq, -sq])
    else:
        # resolvent cubic 8 m^3 + 8 p m^2 + (2 p^2 - 8 r) m - q^2 = 0;
        # its largest real root is positive because the value at m = 0
        # is -q^2 < 0
        m = max(_cubic_real_roots(8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q))
        if m <= 0.0:
            m = 1e-300
        s = np.sqrt(2.0 * m)
        t = q / (2.0 * s)
        # (y^2 + p/2 + m)^2 = 2m (y - q/(4m))^2 splits into two quadratics
        ys.extend(_quad_candidates(1.0, -s, p / 2.0 + m + t))
        ys.extend(_quad_candidates(1.0, s, p / 2.0 + m - t))
    return [y - shift for y in ys]


def solve_real(c4: float, c3: float, c2: float, c1: float, c0: float) -> RootSet:
    """All real roots of c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0.

    Degenerates gracefully to cubic/quadratic/linear when leading
    coefficients vanish (relative threshold 1e-12 * max|c|).  Each kept
    root is polished with at most 5 real Newton steps and satisfies
    |p(r)| <= 1e-8 * (1 + max|c|) * (1 + |r|)^4.
    """
    coeffs = [float(c4), float(c3), float(c2), float(c1), float(c0)]
    cmax = max(abs(c) for c in coeffs)
    if cmax == 0.0:
        raise AllZeroCoefficients("identically zero polynomial")
    lead_tol = DEGENERATE_LEAD_TOL * cmax
    work = list(coeffs)
    while len(work) > 1 and abs(work[0]) <= lead_tol:
        work.pop(0)
    degree = len(work) - 1

    # exact zero trailing coefficients deflate losslessly to a root at 0
    deflated_zero = False
    while len(work) > 1 and work[-1] == 0.0:
        deflated_zero = True
        work.pop()

    if degree == 0:
        return RootSet(np.zeros(0), 0, 0.0)
    if len(work) == 1:
        cands = [complex(0.0)]
    elif len(work) == 2:
        cands = [complex(-work[1] / work[0])]
    elif len(work) == 3:
        cands = _quad_candidates(*work)
    elif len(work) == 4:
        cands = _cubic_candidates(*work)
    else:
        cands = _quartic_candidates(*work)
    if deflated_zero:
        cands.append(complex(0.0))

    deriv = _polyder(coeffs)
    polished = []
    for z in cands:
        if not (np.isfinite(z.real) and np.isfinite(z.imag)):
            continue
        # complex Newton first: a near-double real root whose raw
        # candidate sits slightly off the axis converges back onto it,
        # while a genuine complex root keeps its imaginary part; the
        # best iterate is kept in case a near-singular derivative
        # throws a later step far away
        zbest, zres = z, abs(_polyval(coeffs, z))
        for _ in range(8):
            dp = _polyval(deriv, z)
            if abs(dp) <= 1e-300:
                break
            step = _polyval(coeffs, z) / dp
            z = z - step
            res = abs(_polyval(coeffs, z))
            if res < zres:
                zbest, zres = z, res
            if abs(step) <= 1e-16 * (1.0 + abs(z)):
                break
        if abs(zbest.imag) > IMAG_TOL * (1.0 + abs(zbest.real)):
            continue
        r = float(zbest.real)
        best_r, best_res = r, abs(_polyval(coeffs, r))
        for _ in range(5):
            dp = _polyval(deriv, r)
            if abs(dp) <= 1e-300:
                break
            r = r - _polyval(coeffs, r) / dp
            res = abs(_polyval(coeffs, r))
            if res < best_res:
                best_r, best_res = r, res
        bound = RESIDUAL_TOL * (1.0 + cmax) * (1.0 + abs(best_r)) ** 4
        if best_res <= bound:
            polished.append((best_r, best_res))

    polished.sort(key=lambda t: t[0])
    roots, residuals = [], []
    for r, res in polished:
        if roots and abs(r - roots[-1]) <= DEDUP_TOL:
            if res < residuals[-1]:
                roots[-1], residuals[-1] = r, res
            continue
        roots.append(r)
        residuals.append(res)
    worst = max(residuals) if residuals else 0.0
    return RootSet(np.array(roots), degree, worst)


def nonneg_roots(rs: RootSet) -> np.ndarray:
    """Clamp each root at zero and deduplicate: the candidate step set."""
    if len(rs.roots) == 0:
        return np.zeros(0)
    clamped = np.maximum(rs.roots, 0.0)
    out = [float(clamped[0])]
    for v in clamped[1:]:
        if abs(v - out[-1]) > DEDUP_TOL:
            out.append(float(v))
    return np.array(out)

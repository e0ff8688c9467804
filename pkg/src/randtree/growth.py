"""Transient-regime growth machinery: pure-birth formulas and the saddle solver.

The almost-sure limit of H(t)/t is the unique delta > 0 making the curve
b(s, delta) = s/delta + log(lambda (1 - s p*(s)) / s) tangent to zero at
its interior minimum over the admissible region U = {s > 0 : s >
lambda (1 - s p*(s))}.  For pure birth (p* = 0) this reduces in closed
form to delta = lambda e; in the ergodic regime b stays negative and
delta = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, NoSaddle
from .volterra import GridFunction


class LaplaceEval:
    """Evaluator of s -> s p*(s) for the lifetime distribution p.

    Either the analytic pure-birth tag (s p* identically 0) or a grid CDF
    with defect ell; the transform integral is a Stieltjes sum over the
    stored increments, with no mass beyond the horizon (p flat at ell).
    """

    def __init__(self, p: Optional[GridFunction] = None, ell: Optional[float] = None):
        if p is None:
            self.pure_birth = True
            self.ell = 0.0
            self._mid_t = None
            self._dp = None
        else:
            self.pure_birth = False
            vals = p.values
            if np.any(np.diff(vals) < -1e-12):
                raise DomainError("p must be nondecreasing")
            self.ell = float(vals[-1]) if ell is None else float(ell)
            t = p.times
            self._mid_t = 0.5 * (t[1:] + t[:-1])
            self._dp = np.diff(vals)

    @classmethod
    def for_pure_birth(cls) -> "LaplaceEval":
        return cls(None)

    def s_pstar(self, s: float) -> float:
        """s p*(s) = int e^{-st} dp(t); in [0, 1], to ell as s -> 0."""
        if s < 0:
            raise DomainError(f"s must be >= 0, got {s}")
        if self.pure_birth:
            return 0.0
        if s == 0:
            return float(self._dp.sum())
        return float(np.sum(np.exp(-s * self._mid_t) * self._dp))


@dataclass(frozen=True)
class SaddleResult:
    delta: float
    s_star: float
    region_ok: bool


def b_function(s: float, c: float, p_star: LaplaceEval, lam: float) -> float:
    """b(s, c) = s/c + log(lambda (1 - s p*(s)) / s)."""
    if s <= 0:
        raise DomainError(f"s must be > 0, got {s}")
    if c <= 0:
        raise DomainError(f"c must be > 0, got {c}")
    arg = lam * (1.0 - p_star.s_pstar(s)) / s
    if arg <= 0:
        raise DomainError(f"log argument {arg} <= 0 at s = {s}")
    return s / c + math.log(arg)


def _db_ds(s: float, c: float, p_star: LaplaceEval, lam: float) -> float:
    """Central finite difference of b in s; p* is only known numerically."""
    h = max(1e-6, 1e-4 * s)
    return (b_function(s + h, c, p_star, lam) - b_function(s - h, c, p_star, lam)) / (
        2.0 * h
    )


def region_boundary(p_star: LaplaceEval, lam: float) -> float:
    """Left edge of U: the root of s = lambda (1 - s p*(s)).

    Equals lambda for pure birth; lies in (0, lambda) when p is defective.
    """
    g = lambda s: s - lam * (1.0 - p_star.s_pstar(s))
    lo, hi = 0.0, lam
    if g(hi) < 0:
        raise NoSaddle("no region boundary below s = lambda")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _inner_minimize(c: float, p_star: LaplaceEval, lam: float, s_lo: float) -> float:
    """Stationary point of b(., c) in (s_lo, inf): root of db/ds, increasing in s."""
    a = s_lo * (1.0 + 1e-9) + 1e-12
    if _db_ds(a, c, p_star, lam) > 0:
        raise NoSaddle(f"b is increasing at the region edge for c = {c}")
    b_hi = max(2.0 * a, 2.0 * c)
    for _ in range(200):
        if _db_ds(b_hi, c, p_star, lam) > 0:
            break
        b_hi *= 2.0
        if b_hi > 1e12:
            raise NoSaddle("db/ds never turns positive")
    lo, hi = a, b_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _db_ds(mid, c, p_star, lam) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, mid):
            break
    return 0.5 * (lo + hi)


def solve_delta(p_star: LaplaceEval, lam: float, tol: float = 1e-10) -> SaddleResult:
    """Growth rate delta with b(s*, delta) = (db/ds)(s*, delta) = 0.

    Outer loop: the minimum value g(c) = min_s b(s, c) is strictly
    decreasing in c (the line s/c rotates down), so the tangency c is
    found by bracketed bisection on g.  Ergodic inputs (ell = 1 within
    tolerance) short-circuit to delta = 0.
    """
    if lam <= 0:
        raise DomainError(f"lam must be > 0, got {lam}")
    if p_star.ell >= 1.0 - 1e-9:
        return SaddleResult(delta=0.0, s_star=0.0, region_ok=True)
    s_lo = region_boundary(p_star, lam)

    def g(c: float) -> float:
        try:
            s = _inner_minimize(c, p_star, lam, s_lo)
        except NoSaddle:
            # b increases from the region edge: the infimum over U sits at
            # the edge, where the log term vanishes and b = s_lo / c > 0
            return s_lo / c
        return b_function(s, c, p_star, lam)

    # bracket the tangency: g > 0 for small c, g < 0 for large c
    c_lo = max(s_lo, 1e-6)
    for _ in range(200):
        if g(c_lo) > 0:
            break
        c_lo *= 0.5
        if c_lo < 1e-12:
            raise NoSaddle("b never positive: no growth (ergodic-like input)")
    c_hi = max(2.0 * c_lo, 4.0 * lam)
    for _ in range(200):
        if g(c_hi) < 0:
            break
        c_hi *= 2.0
        if c_hi > 1e12:
            raise NoSaddle("tangency bracketing failed at the upper end")
    lo, hi = c_lo, c_hi
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, mid):
            break
    delta = 0.5 * (lo + hi)
    s_star = _inner_minimize(delta, p_star, lam, s_lo)
    return SaddleResult(delta=delta, s_star=s_star, region_ok=s_star > s_lo)


def pure_birth_mean_level(lam: float, n: int, t: float) -> float:
    """E X_n(t) = (lambda t)^n / n! for pure birth."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if n == 0:
        return 1.0
    if t == 0:
        return 0.0
    return math.exp(n * math.log(lam * t) - math.lgamma(n + 1))


def pure_birth_volume_pgf(z: float, lam: float, t: float) -> float:
    """E z^{N(t)} = 1 / (1 + (1/z - 1) e^{lambda t}) for pure birth."""
    if not 0 < z <= 1:
        raise DomainError(f"z must be in (0, 1], got {z}")
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    return 1.0 / (1.0 + (1.0 / z - 1.0) * math.exp(lam * t))


def level_transforms(
    p_star: LaplaceEval, lam: float, k: int, s: float
) -> tuple[float, float]:
    """Transforms of the level counts: (phi_k, phi_tilde_k) at real s > 0.

    phi_k = lambda^k (1 - s p*)^k / s^{k+1}; phi_tilde_k carries one more
    factor of (1 - s p*).  Evaluated in log space against overflow.
    """
    if s <= 0:
        raise DomainError(f"s must be > 0, got {s}")
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    one_minus = 1.0 - p_star.s_pstar(s)
    if one_minus <= 0:
        return 0.0, 0.0
    log_phi = k * (math.log(lam) + math.log(one_minus)) - (k + 1) * math.log(s)
    return math.exp(log_phi), math.exp(log_phi + math.log(one_minus))

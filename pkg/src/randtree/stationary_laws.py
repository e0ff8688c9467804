"""Closed-form stationary laws of the ergodic tree and their asymptotics.

The stationary volume follows a Borel distribution with parameter r (the
root of r e^{-r} = rho), the root degree is Poisson(r), and the height
tail obeys the one-step recursion d_{h+1} = 1 - exp(-r d_h).  For r < 1
that recursion is linearized by a Schroeder functional equation whose
solution theta gives the exact geometric tail constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateError,
    DomainError,
    SlowConvergence,
    ThetaRangeError,
)
from .model_core import INV_E, solve_r


@dataclass
class HeightTail:
    """Tail sequence d[h] = P{H > h-1} seeded d[0] = x (x = 1 for the law)."""

    r: float
    d: np.ndarray

    def pmf(self) -> np.ndarray:
        """P{H = h} for h = 0 .. len(d)-2, by differencing the tail."""
        return -np.diff(self.d)

    def to_csv(self, path) -> None:
        arr = np.column_stack([np.arange(self.d.size), self.d])
        np.savetxt(
            path, arr, delimiter=",", header="h,tail_probability", comments="", fmt="%d,%.17g"
        )


def _r_of(rho: float) -> float:
    if rho <= 0 or rho > INV_E + 1e-12:
        raise DomainError(f"requires 0 < rho <= 1/e, got {rho}")
    return solve_r(rho)


def borel_log_pmf(rho: float, k: int) -> float:
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    r = _r_of(rho)
    return (k - 1) * math.log(k) - math.lgamma(k + 1) + k * math.log(rho) - math.log(r)


def borel_pmf(rho: float, k: int) -> float:
    """P{N = k} = (1/r) k^{k-1} rho^k / k!, evaluated in log space."""
    return math.exp(borel_log_pmf(rho, k))


def borel_pmf_vector(rho: float, tail_mass: float = 1e-12, k_cap: int = 1 << 20) -> np.ndarray:
    """pmf over k = 1..K with K adaptive so the missing mass is < tail_mass."""
    out = [0.0]  # index 0 unused placeholder removed below
    total = 0.0
    k = 0
    while total < 1.0 - tail_mass:
        k += 1
        if k > k_cap:
            raise SlowConvergence(f"Borel truncation passed k = {k_cap}")
        pk = borel_pmf(rho, k)
        out.append(pk)
        total += pk
    return np.array(out[1:])


def mean_volume(rho: float) -> float:
    """E N = 1/(1 - r); diverges at rho = 1/e."""
    r = _r_of(rho)
    if r >= 1.0:
        raise DomainError("mean volume is infinite at rho = 1/e")
    return 1.0 / (1.0 - r)


def volume_tail_asymptotic(rho: float, k: int) -> float:
    """Stirling estimate (1/r)(rho e)^k / (sqrt(2 pi) k^{3/2})."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    r = _r_of(rho)
    logv = (
        k * (math.log(rho) + 1.0)
        - 1.5 * math.log(k)
        - 0.5 * math.log(2.0 * math.pi)
        - math.log(r)
    )
    return math.exp(logv)


def mean_volume_critical_approx(rho: float) -> float:
    """Near-critical estimate E N ~ 1/sqrt(2 (1 - rho e))."""
    if rho >= INV_E:
        raise DomainError(f"requires rho < 1/e, got {rho}")
    if rho <= 0:
        raise DomainError(f"requires rho > 0, got {rho}")
    return 1.0 / math.sqrt(2.0 * (1.0 - rho * math.e))


def root_degree_pmf(rho: float, k: int) -> float:
    """Stationary root degree is Poisson with mean r."""
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    r = _r_of(rho)
    return math.exp(-r + k * math.log(r) - math.lgamma(k + 1)) if k else math.exp(-r)


def height_tail(rho: float, h_max: int, x0: float = 1.0) -> HeightTail:
    """Iterate d_{h+1} = 1 - exp(-r d_h) from d_0 = x0, h_max steps.

    With x0 = 1, d[h] = P{H > h-1} for h >= 1 and P{H = 0} = 1 - d[1].
    Uses expm1 so the critical case r = 1 stays accurate at tiny d.
    """
    if h_max < 0:
        raise DomainError(f"h_max must be >= 0, got {h_max}")
    if x0 < 0:
        raise DomainError(f"x0 must be >= 0, got {x0}")
    r = _r_of(rho)
    d = np.empty(h_max + 1)
    d[0] = x0
    for h in range(h_max):
        d[h + 1] = -math.expm1(-r * d[h])
    return HeightTail(r=r, d=d)


def _iterate_scaled(r: float, x: float, tol: float, h_cap: int) -> tuple[float, int]:
    """Return (r^{-h} d_h, h) once the rigorous error bound drops below tol.

    Bound: 0 <= r^{-h} d_h - theta <= (r x^2 / 2) r^h / (1 - r).
    Tracked as a running product to avoid under/overflow.
    """
    if not 0 < r < 1:
        raise DomainError(f"requires 0 < r < 1, got {r}")
    bound_pref = 0.5 * r * x * x / (1.0 - r)
    u = x  # r^{-h} d_h
    d = x
    rh = 1.0  # r^h
    for h in range(h_cap):
        if bound_pref * rh < tol:
            return u, h
        if d == 0.0:
            return 0.0, h
        step = -math.expm1(-r * d)
        u *= step / (r * d)
        d = step
        rh *= r
    raise SlowConvergence(
        f"error bound still {bound_pref * rh:.3e} after {h_cap} iterations (r = {r})"
    )


def schroeder_theta(r: float, x: float, tol: float = 1e-12, h_cap: int = 100000) -> float:
    """theta(r, x) = lim r^{-h} d_h, stopped by the explicit error bound."""
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    if x == 0:
        return 0.0
    val, _ = _iterate_scaled(r, x, tol, h_cap)
    return val


def theta_coeffs(r: float, order: int) -> np.ndarray:
    """Power-series coefficients theta_1 .. theta_order of theta(r, .).

    Obtained by matching theta(f(x)) = r theta(x) for f(x) = 1 - e^{-rx}
    order by order: theta_n (r - r^n) = sum_{i<n} theta_i [x^n] f^i.
    """
    if not 0 < r < 1:
        raise DomainError(f"requires 0 < r < 1, got {r}")
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    n_max = order
    # f as a truncated power series (index = power of x, degree n_max)
    f = np.zeros(n_max + 1)
    for j in range(1, n_max + 1):
        f[j] = -((-r) ** j) / math.factorial(j)
    # powers of f, truncated
    fpow = np.zeros((n_max + 1, n_max + 1))
    fpow[0, 0] = 1.0
    for i in range(1, n_max + 1):
        full = np.convolve(fpow[i - 1, :], f)[: n_max + 1]
        fpow[i, :] = full
    theta = np.zeros(n_max + 1)
    theta[1] = 1.0
    for n in range(2, n_max + 1):
        denom = r - r**n
        if denom == 0:
            raise DegenerateError(f"singular coefficient equation at order {n}")
        rhs = sum(theta[i] * fpow[i, n] for i in range(1, n))
        theta[n] = rhs / denom
    return theta[1:]


def omega_inverse(r: float, y: float, tol: float = 1e-12) -> float:
    """Inverse of theta in x: the w >= 0 with theta(r, w) = y.

    theta is strictly increasing in x, so monotone bisection applies; the
    upper bracket expands geometrically and RangeError-style failure means
    y exceeds the attained range.
    """
    if not 0 < r < 1:
        raise DomainError(f"requires 0 < r < 1, got {r}")
    if y < 0:
        raise ThetaRangeError(f"y must be >= 0, got {y}")
    if y == 0:
        return 0.0
    hi = 1.0
    for _ in range(200):
        if schroeder_theta(r, hi, tol) >= y:
            break
        hi *= 2.0
        if hi > 1e12:
            raise ThetaRangeError(f"y = {y} exceeds the attained theta range")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if schroeder_theta(r, mid, tol) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def height_tail_asymptotic(rho: float, h: int) -> float:
    """Leading-order P{H > h}: theta(r,1) r^{h+1} subcritically, 2/h critically."""
    if h < 1:
        raise DomainError(f"h must be >= 1, got {h}")
    r = _r_of(rho)
    if r >= 1.0:
        return 2.0 / h
    return schroeder_theta(r, 1.0) * r ** (h + 1)

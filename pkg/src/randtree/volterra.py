"""Numerical solution of the lifetime system and its iterative schemes.

The lifetime distribution p(t) of a generic vertex and the auxiliary
function beta(t) satisfy a coupled pair of equations: beta is an
exponential functional of p, and p solves a Volterra equation of the
second kind driven by beta.  This module marches that system on a uniform
grid (trapezoid quadrature everywhere, direct O(N^2) convolution) and
implements the fixed-point schemes built on it:

* the decreasing scheme started from beta == mu (proper iterates, yields
  the mean lifetime and r = lambda * m in the ergodic regime);
* the increasing scheme started from gamma = mu * exp(-lambda t)
  (defective iterates, converges for every rho and estimates the lifetime
  defect ell);
* the scalar recursion r_{k+1} = rho * exp(r_k);
* the exponential-bound recursions for (a_k, b_k) and (ell_k, theta_k).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import model_core
from .errors import (
    ConvergenceError,
    DomainError,
    GridError,
    InstabilityError,
    NoConvergence,
    NonmonotoneError,
    TailNotFlat,
    TailNotFlatWarning,
)
from .model_core import INV_E, ModelParams


@dataclass
class GridFunction:
    """A function of time sampled at 0, h, 2h, ..., Nh."""

    step: float
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if not self.step > 0:
            raise GridError(f"step must be > 0, got {self.step}")
        if self.values.ndim != 1 or self.values.size == 0:
            raise GridError("values must be a nonempty 1-d array")
        if not np.all(np.isfinite(self.values)):
            raise GridError("values must be finite")

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.values.size)

    @property
    def horizon(self) -> float:
        return self.step * (self.values.size - 1)

    def to_csv(self, path) -> None:
        arr = np.column_stack([self.times, self.values])
        np.savetxt(path, arr, delimiter=",", header="t,value", comments="")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = arr[:, 0]
        if t.size < 2:
            raise GridError("need at least two rows")
        h = t[1] - t[0]
        if not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12 * max(h, 1.0)):
            raise GridError("grid is not uniform")
        return cls(step=h, values=arr[:, 1])


@dataclass
class SchemeState:
    """Converged (or truncated) state of one of the alternating schemes."""

    k: int
    p: GridFunction
    beta: GridFunction
    m_k: float
    r_k: float
    converged: bool = True


@dataclass
class ExpBoundSeq:
    pairs: list = field(default_factory=list)
    limit: Optional[tuple] = None


def _cumtrapz(f: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum(0.5 * h * (f[1:] + f[:-1]), out=out[1:])
    return out


def beta_from_p(p: GridFunction, params: ModelParams) -> GridFunction:
    """beta(t) = mu * exp(-lambda * int_0^t (1 - p(x)) dx) on p's grid."""
    integral = _cumtrapz(1.0 - p.values, p.step)
    return GridFunction(p.step, params.mu * np.exp(-params.lam * integral))


@njit(cache=True)
def _march_density(beta: np.ndarray, h: float) -> np.ndarray:
    """Density d = p' solving beta(t) = d(t) + int_0^t beta(t-y) d(y) dy.

    Trapezoid discretization; at node i the unknown d[i] enters linearly
    and is solved in closed form.  The interior sum is a dot product with
    a reversed, precomputed copy of beta so BLAS does the O(N^2) work.
    """
    n = beta.shape[0]
    d = np.zeros(n)
    d[0] = beta[0]
    brev = beta[::-1].copy()
    denom = 1.0 + 0.5 * h * beta[0]
    for i in range(1, n):
        acc = 0.5 * beta[i] * d[0]
        if i > 1:
            acc += np.dot(brev[n - i : n - 1], d[1:i])
        d[i] = (beta[i] - h * acc) / denom
    return d


def solve_p_from_beta(beta: GridFunction, neg_tol: float = 1e-8) -> GridFunction:
    """March the Volterra equation forward, returning the CDF p.

    Raises InstabilityError when the recovered density dips below -neg_tol
    (relative to beta(0)), which signals a grid too coarse for the kernel.
    """
    if np.any(beta.values < 0):
        raise GridError("beta must be nonnegative")
    d = _march_density(beta.values, beta.step)
    if d.min() < -neg_tol * max(beta.values[0], 1.0):
        raise InstabilityError(
            f"negative density {d.min():.3e}: grid step {beta.step} too coarse"
        )
    p = _cumtrapz(np.maximum(d, 0.0), beta.step)
    np.maximum.accumulate(p, out=p)
    return GridFunction(beta.step, p)


def _mean_from_cdf(p: GridFunction) -> float:
    """int (1 - p) over the grid (tail beyond the horizon ignored)."""
    return float(np.trapezoid(1.0 - p.values, dx=p.step))


def _alternating_scheme(
    params: ModelParams,
    grid: tuple[float, float],
    k_max: int,
    tol: float,
    start: np.ndarray,
    decreasing: bool,
) -> SchemeState:
    h, horizon = grid
    n = int(round(horizon / h)) + 1
    if n < 3:
        raise GridError(f"grid ({h}, {horizon}) has fewer than 3 nodes")
    beta = GridFunction(h, start)
    mono_tol = 50.0 * h * h + 1e-9
    p_prev: Optional[np.ndarray] = None
    p = beta  # placeholder, replaced on first pass
    for k in range(1, k_max + 1):
        p = solve_p_from_beta(beta)
        if p_prev is not None:
            gap = p.values - p_prev
            bad = gap.max() if decreasing else -gap.min()
            if bad > mono_tol:
                word = "decreasing" if decreasing else "increasing"
                raise NonmonotoneError(
                    f"iterates not {word}: violation {bad:.3e} at step {k}"
                )
        m_k = _mean_from_cdf(p)
        r_k = params.lam * m_k
        if decreasing and r_k > 1.0 + 1e-6:
            raise NoConvergence(
                f"r_k = {r_k:.6f} passed 1 at step {k}: rho > 1/e, "
                "the decreasing scheme has no proper limit"
            )
        change = np.inf if p_prev is None else float(np.abs(p.values - p_prev).max())
        p_prev = p.values
        beta = beta_from_p(p, params)
        if change <= tol:
            if decreasing:
                _require_proper(p, params, h)
            flagged = decreasing and abs(params.rho - INV_E) <= 1e-6
            return SchemeState(
                k=k, p=p, beta=beta, m_k=m_k, r_k=r_k, converged=not flagged
            )
    if decreasing and abs(params.rho - INV_E) > 1e-6:
        raise NoConvergence(f"no convergence within {k_max} iterations")
    # near-critical runs converge arbitrarily slowly; return flagged
    return SchemeState(k=k_max, p=p, beta=beta, m_k=m_k, r_k=r_k, converged=False)


def _require_proper(p: GridFunction, params: ModelParams, h: float) -> None:
    """Reject a defective stationary point of the decreasing scheme.

    Above rho = 1/e the iterates converge (on any finite grid) to a
    defective limit with a flat plateau strictly below 1; the proper
    limit the scheme is after does not exist there, so report it.
    """
    i0 = int(0.9 * (p.values.size - 1))
    plateau = float(p.values[i0:].mean())
    rise = float(p.values[-1] - p.values[i0])
    defect = 1.0 - plateau
    if defect > max(1e-3, 100.0 * h * h) and rise < 0.1 * defect:
        raise NoConvergence(
            f"limit is defective (plateau {plateau:.6f} < 1): rho > 1/e, "
            "the decreasing scheme has no proper limit"
        )


def ite_scheme(
    params: ModelParams,
    grid: tuple[float, float],
    k_max: int = 200,
    tol: float = 1e-9,
) -> SchemeState:
    """Decreasing scheme from beta_0 == mu; proper limit iff rho <= 1/e."""
    if params.mu <= 0:
        raise DomainError("ite_scheme requires mu > 0")
    h, horizon = grid
    n = int(round(horizon / h)) + 1
    start = np.full(n, params.mu)
    return _alternating_scheme(params, grid, k_max, tol, start, decreasing=True)


def ite1_scheme(
    params: ModelParams,
    grid: tuple[float, float],
    k_max: int = 500,
    tol: float = 1e-9,
) -> tuple[GridFunction, float]:
    """Increasing scheme from gamma_0 = mu * exp(-lambda t); converges for all rho.

    Returns the limiting defective CDF q and the tail-plateau estimate of
    ell (mean of q over the last 10% of the grid).
    """
    if params.mu <= 0:
        raise DomainError("ite1_scheme requires mu > 0")
    h, horizon = grid
    n = int(round(horizon / h)) + 1
    t = h * np.arange(n)
    start = params.mu * np.exp(-params.lam * t)
    state = _alternating_scheme(params, grid, k_max, tol, start, decreasing=False)
    q = state.p
    i0 = int(0.9 * (n - 1))
    ell = float(q.values[i0:].mean())
    rise = float(q.values[-1] - q.values[i0])
    if rise > 1e-3 * max(ell, 1e-12):
        warnings.warn(
            f"q still rising at the horizon (rise {rise:.3e}): "
            "ell estimate unreliable, extend the grid",
            TailNotFlatWarning,
        )
    return q, ell


def r_recursion(
    rho: float, k_max: int = 10000, tol: float = 1e-12
) -> tuple[np.ndarray, Optional[float]]:
    """r_0 = rho, r_{k+1} = rho * exp(r_k).

    Returns the computed sequence and its limit, or None when the sequence
    diverges (detected analytically: once r_k > 1 it cannot return).
    """
    if rho <= 0:
        raise DomainError(f"rho must be > 0, got {rho}")
    seq = [rho]
    r = rho
    for _ in range(k_max):
        r_next = rho * math.exp(r)
        seq.append(r_next)
        if r_next > 1.0 + tol:
            return np.array(seq), None
        if abs(r_next - r) <= tol:
            return np.array(seq), r_next
        r = r_next
    return np.array(seq), seq[-1]


def rec_ab(
    params: ModelParams, k_max: int = 100000, tol: float = 1e-12
) -> ExpBoundSeq:
    """Tail-bound pairs (a_k, b_k) from a_0 = mu/(lam+mu), b_0 = lam+mu.

    Each step solves the two coupled update equations jointly in closed
    form: with A = mu * exp(-lam a/b) and B = lam (1 - a), the next pair is
    a' = A/(A+B), b' = A+B.
    """
    if params.mu <= 0:
        raise DomainError("rec_ab requires mu > 0")
    lam, mu = params.lam, params.mu
    a, b = mu / (lam + mu), lam + mu
    seq = ExpBoundSeq(pairs=[(a, b)])
    for _ in range(k_max):
        big_a = mu * math.exp(-lam * a / b)
        big_b = lam * (1.0 - a)
        a_next = big_a / (big_a + big_b)
        b_next = big_a + big_b
        seq.pairs.append((a_next, b_next))
        if abs(a_next - a) + abs(b_next - b) <= tol:
            seq.limit = (a_next, b_next)
            return seq
        a, b = a_next, b_next
    raise ConvergenceError(f"(a_k, b_k) not converged after {k_max} steps")


def _ii_series(x: float, y: float, tol: float = 1e-15) -> float:
    """sum_{n>=0} y^n / (n! (x+n)); valid for any x not in {0,-1,-2,...}."""
    term = 1.0  # y^n / n!
    total = 0.0
    for n in range(0, 10000):
        if x + n == 0:
            raise DomainError(f"series pole at x = {x}, n = {n}")
        total += term / (x + n)
        term *= y / (n + 1)
        if n > y and abs(term / (abs(x) + n + 1)) < tol * max(abs(total), 1e-300):
            return total
    raise ConvergenceError("incomplete-gamma series did not terminate")


def incomplete_gamma_II(x: float, y: float, tol: float = 1e-15) -> float:
    """II(x, y) = int_0^inf exp(-x t + y e^{-t}) dt, by its power series."""
    if x <= 0:
        raise DomainError(f"incomplete_gamma_II requires x > 0, got {x}")
    if y < 0:
        raise DomainError(f"y must be >= 0, got {y}")
    return _ii_series(x, y, tol)


def _theta_root(lam: float, mu: float, ell: float, theta: float) -> float:
    """First positive root in t of the exponential-rate equation.

    The root lies strictly between lam*(1-ell) and lam*(1-ell)+theta,
    where the series argument runs over (-1, 0); the left end gives -inf,
    the right end +inf, and a sign scan plus bisection pins it down.
    """
    lo = lam * (1.0 - ell)
    hi = lo + theta
    pref = (mu / theta) * math.exp(-lam * ell / theta)
    y = lam * ell / theta

    def g(t: float) -> float:
        return pref * _ii_series((lo - t) / theta, y) + 1.0

    eps = 1e-9 * theta
    a, b = lo + eps, hi - eps
    ga = g(a)
    if ga > 0:
        # scan for the sign change (g -> -inf only in a narrow layer when
        # the prefactor is small)
        grid = np.linspace(a, b, 200)
        vals = [g(t) for t in grid]
        idx = next((i for i, v in enumerate(vals) if v < 0), None)
        if idx is None or idx == 0:
            raise InstabilityError(
                f"no sign change for the rate root on ({lo:.4g}, {hi:.4g})"
            )
        a, ga = grid[idx], vals[idx]
        b = grid[idx - 1]
        a, b = min(a, b), max(a, b)
    if g(b) < 0:
        raise InstabilityError("rate-root bracketing failed at the upper end")
    for _ in range(200):
        mid = 0.5 * (a + b)
        if g(mid) < 0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-14 * max(1.0, abs(mid)):
            break
    return 0.5 * (a + b)


def lower_bound_ld(
    params: ModelParams, k_max: int = 500, tol: float = 1e-10
) -> tuple[float, float, ExpBoundSeq]:
    """Limits (ell_d, theta) of the exponential lower-bound iteration.

    ell_d <= ell always; the iteration is only numerically stable well
    above rho = 1/e (near or below it the rate root bracketing degrades
    and InstabilityError is raised).
    """
    if params.mu <= 0:
        raise DomainError("lower_bound_ld requires mu > 0")
    lam, mu = params.lam, params.mu
    ell, theta = mu / (lam + mu), lam + mu
    seq = ExpBoundSeq(pairs=[(ell, theta)])
    for _ in range(k_max):
        x_arg = lam * (1.0 - ell) / theta
        if x_arg <= 0:
            raise InstabilityError("ell reached 1: iteration left its domain")
        alpha = (
            (mu / theta)
            * math.exp(-lam * ell / theta)
            * incomplete_gamma_II(x_arg, lam * ell / theta)
        )
        ell_next = alpha / (1.0 + alpha)
        theta_next = _theta_root(lam, mu, ell, theta)
        seq.pairs.append((ell_next, theta_next))
        if abs(ell_next - ell) + abs(theta_next - theta) <= tol:
            seq.limit = (ell_next, theta_next)
            return ell_next, theta_next, seq
        ell, theta = ell_next, theta_next
    raise ConvergenceError(f"(ell_k, theta_k) not converged after {k_max} steps")


def epsilon_bar(p: GridFunction, ell: float, lam: float) -> float:
    """lambda * int_0^inf (ell - p(x)) dx with exponential tail extrapolation.

    The integrand on the grid is handled by the trapezoid rule; the mass
    beyond the horizon is estimated by fitting an exponential decay rate
    to ell - p over the last 10% of the grid.
    """
    vals = p.values
    if vals.max() > ell + 1e-9:
        raise DomainError(f"ell = {ell} is below sup p = {vals.max()}")
    gap = np.maximum(ell - vals, 0.0)
    base = float(np.trapezoid(gap, dx=p.step))
    tail = 0.0
    if gap[-1] > 1e-14 * max(ell, 1.0):
        i0 = int(0.9 * (vals.size - 1))
        window = gap[i0:]
        if np.any(window <= 0):
            raise TailNotFlat("ell - p touches zero inside the fit window")
        t = p.step * np.arange(window.size)
        slope, _ = np.polyfit(t, np.log(window), 1)
        if not slope < 0:
            raise TailNotFlat(
                f"fitted tail rate {-slope:.3e} is not positive: horizon too short"
            )
        tail = float(gap[-1] / (-slope))
    return lam * (base + tail)

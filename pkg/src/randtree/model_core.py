"""Model parameters, the rho = 1/e classification and scalar transcendental roots.

Everything downstream is driven by two scalar equations:

* ``r * exp(-r) = rho`` on (0, 1], giving the mean offspring number ``r``
  and the mean lifetime ``m = r / lambda`` in the ergodic regime;
* ``x * exp(x) = 1 / rho``, whose positive root brackets the defect
  ``ell`` of the lifetime distribution in the transient regime.

Both are solved by bracketed bisection refined with Newton steps (Newton
falls back to bisection whenever it would leave the bracket, which matters
near rho = 1/e where the derivative of ``r * exp(-r)`` vanishes).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import ConvergenceError, DomainError

INV_E = math.exp(-1.0)

#: |rho - 1/e| below this is reported as the Critical regime; a floating
#: point rho exactly equal to 1/e is unrepresentable.
CRITICAL_BAND = 1e-9

#: rho closer to 1/e than this is snapped to the exact root r = 1.
_SNAP_BAND = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Single-class birth/death rates.

    ``lam`` is the birth rate per vertex, ``mu`` the death rate per
    eligible leaf.  ``mu = 0`` means pure birth (``rho`` undefined).
    """

    lam: float
    mu: float

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise DomainError(f"lam must be > 0, got {self.lam}")
        if self.mu < 0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")

    @property
    def rho(self) -> float:
        if self.mu == 0:
            raise DomainError("rho undefined for mu = 0 (pure birth)")
        return self.lam / self.mu


@dataclass(frozen=True)
class RootSolveCfg:
    abs_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be > 0")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")


class Regime(enum.Enum):
    ERGODIC = "ergodic"
    CRITICAL = "critical"
    TRANSIENT = "transient"
    PURE_BIRTH = "pure_birth"


@dataclass(frozen=True)
class Classification:
    regime: Regime
    r: Optional[float] = None
    x: Optional[float] = None
    ell_lower: Optional[float] = None
    ell_upper: Optional[float] = None
    mean_lifetime: Optional[float] = None


def _newton_bisect(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    lo: float,
    hi: float,
    abs_tol: float,
    max_iter: int,
) -> float:
    """Root of f on [lo, hi] with f(lo) <= 0 <= f(hi).

    Newton steps are taken from the current iterate; any step leaving the
    bracket is replaced by a bisection step.  Terminates on residual or on
    bracket collapse, whichever comes first.
    """
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise DomainError(f"root not bracketed on [{lo}, {hi}]")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fm = f(mid)
        if abs(fm) <= abs_tol and hi - lo <= 1e-14 * max(1.0, abs(mid)) + 1e-300:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2.3e-16 * max(1.0, abs(mid)):
            return 0.5 * (lo + hi)
        d = fprime(mid)
        if d != 0:
            nxt = mid - fm / d
            if lo < nxt < hi:
                mid = nxt
                continue
        mid = 0.5 * (lo + hi)
    if abs(f(mid)) <= abs_tol:
        return mid
    raise ConvergenceError(f"root solve did not converge in {max_iter} iterations")


def solve_r(rho: float, cfg: RootSolveCfg = RootSolveCfg()) -> float:
    """Smallest root of r * exp(-r) = rho, defined for 0 < rho <= 1/e."""
    if rho <= 0 or rho > INV_E + cfg.abs_tol:
        raise DomainError(f"solve_r requires 0 < rho <= 1/e, got {rho}")
    if INV_E - rho <= _SNAP_BAND:
        return 1.0
    f = lambda r: r * math.exp(-r) - rho
    fp = lambda r: math.exp(-r) * (1.0 - r)
    return _newton_bisect(f, fp, 0.0, 1.0, cfg.abs_tol, cfg.max_iter)


def solve_x(rho: float, cfg: RootSolveCfg = RootSolveCfg()) -> float:
    """Positive root of x * exp(x) = 1/rho, defined for rho > 0."""
    if rho <= 0:
        raise DomainError(f"solve_x requires rho > 0, got {rho}")
    target = 1.0 / rho
    if abs(target - math.e) <= _SNAP_BAND * math.e:
        return 1.0
    hi = 1.0
    while hi * math.exp(hi) < target:
        hi *= 2.0
    f = lambda x: x * math.exp(x) - target
    fp = lambda x: math.exp(x) * (1.0 + x)
    return _newton_bisect(f, fp, 0.0, hi, cfg.abs_tol, cfg.max_iter)


def ell_bounds(rho: float, cfg: RootSolveCfg = RootSolveCfg()) -> tuple[float, float]:
    """Bracket [x, min(1, 1/rho)] for the lifetime defect ell, rho > 1/e."""
    if rho <= INV_E:
        raise DomainError(f"ell_bounds requires rho > 1/e, got {rho}")
    return solve_x(rho, cfg), min(1.0, 1.0 / rho)


def classify(params: ModelParams, cfg: RootSolveCfg = RootSolveCfg()) -> Classification:
    """Regime verdict plus the roots and bounds attached to it."""
    if params.mu == 0:
        return Classification(regime=Regime.PURE_BIRTH)
    rho = params.rho
    x = solve_x(rho, cfg)
    if abs(rho - INV_E) <= CRITICAL_BAND:
        return Classification(
            regime=Regime.CRITICAL,
            r=1.0,
            x=x,
            ell_lower=1.0,
            ell_upper=1.0,
            mean_lifetime=1.0 / params.lam,
        )
    if rho < INV_E:
        r = solve_r(rho, cfg)
        return Classification(
            regime=Regime.ERGODIC,
            r=r,
            x=x,
            ell_lower=1.0,
            ell_upper=1.0,
            mean_lifetime=r / params.lam,
        )
    lower, upper = ell_bounds(rho, cfg)
    return Classification(
        regime=Regime.TRANSIENT,
        r=None,
        x=x,
        ell_lower=lower,
        ell_upper=upper,
        mean_lifetime=None,
    )
